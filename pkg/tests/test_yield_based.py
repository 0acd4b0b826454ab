import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from capq.classical import ProcessMoments, SpecLimits, basic_indices, s_pk
from capq.dist_core import ProcessModel
from capq.errors import DomainError
from capq.yield_based import (CLEMENTS_A, DesiredRegion, borges_ho_c, clements_cp, mukherjee_i, perakis_cpc,
                              yb_cf, yb_ratio, yield_summary)

N01 = ProcessModel.normal(0.0, 1.0)


def test_yield_three_sigma():
    ys = yield_summary(ProcessModel.normal(5.0, 2.0), SpecLimits(-1.0, 11.0))
    assert ys.p == pytest.approx(stats.norm.cdf(3) - stats.norm.cdf(-3), rel=1e-14)
    assert round(ys.p, 4) == 0.9973
    assert ys.p + ys.lower_nc + ys.upper_nc == pytest.approx(1.0, abs=1e-15)


def test_yield_examples():
    assert yield_summary(ProcessModel.uniform(0, 1), SpecLimits(0.1, 0.9)).p == pytest.approx(0.8, rel=1e-14)
    assert yield_summary(N01, SpecLimits(-2, 2)).p == pytest.approx(0.954500, abs=1e-6)


def test_discrete_yield_includes_both_endpoints():
    m = ProcessModel.poisson(3.0)
    ys = yield_summary(m, SpecLimits(2.0, 5.0))
    expected = stats.poisson(3.0).pmf([2, 3, 4, 5]).sum()
    assert ys.p == pytest.approx(expected, rel=1e-12)


def test_clements_examples():
    assert clements_cp(SpecLimits(0.1, 0.9), ProcessModel.uniform(0, 1), 0.00135) == pytest.approx(0.8 / 0.9973,
                                                                                                  rel=1e-12)
    expo = clements_cp(SpecLimits(0.01, 3.0), ProcessModel.exponential(1.0), 0.00135)
    assert expo == pytest.approx(2.99 / (-math.log(0.00135) + math.log1p(-0.00135)), rel=1e-12)
    assert expo == pytest.approx(0.45259, abs=1e-4)


@pytest.mark.parametrize("mu,sigma,lower,upper", [(0, 1, -3, 3), (23, 3, 10, 30), (-4, 0.01, -4.1, -3.95)])
def test_clements_equals_c_p_for_normal(mu, sigma, lower, upper):
    spec = SpecLimits(lower, upper)
    cp = basic_indices(spec, ProcessMoments(mu, sigma)).c_p
    assert clements_cp(spec, ProcessModel.normal(mu, sigma)) == pytest.approx(cp, rel=1e-14)


def test_clements_default_level_is_the_three_sigma_tail():
    assert CLEMENTS_A == pytest.approx(stats.norm.cdf(-3), rel=1e-15)
    assert round(CLEMENTS_A, 5) == 0.00135


def test_mukherjee_examples():
    assert mukherjee_i(SpecLimits(0.1, 0.9), ProcessModel.uniform(0, 1), 0.05, 0.05) == pytest.approx(0.8 / 0.9)
    assert mukherjee_i(SpecLimits(-3, 3), N01, 0.00135, 0.00135) == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(DomainError):
        mukherjee_i(SpecLimits(-3, 3), N01, 0.0, 0.1)
    with pytest.raises(DomainError):
        mukherjee_i(SpecLimits(-3, 3), N01, 0.6, 0.5)
    with pytest.raises(DomainError):
        mukherjee_i(SpecLimits(-3, 3), ProcessModel.empirical([1.0, 1.0, 1.0]), 0.1, 0.1)
    with pytest.raises(DomainError):
        clements_cp(SpecLimits(-3, 3), N01, 0.5)


FAMILY_MODELS = [ProcessModel.normal(1, 2), ProcessModel.lognormal(0, 0.5), ProcessModel.weibull(2, 1),
                 ProcessModel.gamma(3, 1), ProcessModel.uniform(0, 4), ProcessModel.exponential(2),
                 ProcessModel.poisson(10), ProcessModel.binomial(50, 0.3),
                 ProcessModel.empirical(np.arange(1000.0))]


@pytest.mark.parametrize("model", FAMILY_MODELS, ids=repr)
def test_clements_is_mukherjee_at_equal_tails(model):
    spec = SpecLimits(0.5, 3.5)
    for a in (0.00135, 0.01, 0.2):
        assert clements_cp(spec, model, a) == mukherjee_i(spec, model, a, a)


def test_yb_ratio():
    assert yb_ratio(0.0027, N01, SpecLimits(-2, 2)) == pytest.approx(0.0027 / (2 * stats.norm.sf(2)), rel=1e-12)
    assert yb_ratio(0.0027, N01, SpecLimits(-2, 2)) == pytest.approx(0.05934, abs=1e-5)
    assert yb_ratio(0.1, ProcessModel.uniform(0, 1), SpecLimits(-1, 2)) == math.inf
    with pytest.raises(DomainError):
        yb_ratio(0.0, N01, SpecLimits(-2, 2))


def test_yb_cf():
    m = ProcessModel.normal(0.5, 1.0)
    value = yb_cf(0.00135, 0.00135, m, SpecLimits(-3, 3))
    expected = min(0.00135 / stats.norm.cdf(-3.5), 0.00135 / stats.norm.sf(2.5))
    assert value == pytest.approx(expected, rel=1e-12)
    assert value == pytest.approx(0.2174, abs=1e-4)
    sym = yb_cf(0.01, 0.01, N01, SpecLimits(-2, 2))
    assert sym == pytest.approx(yb_ratio(0.02, N01, SpecLimits(-2, 2)), rel=1e-12)
    assert yb_cf(0.1, 0.1, ProcessModel.uniform(0, 1), SpecLimits(-1, 2)) == math.inf
    assert yb_cf(0.1, 0.1, ProcessModel.uniform(0, 1), SpecLimits(-1, 0.5)) == pytest.approx(0.2)


def test_borges_ho():
    m = ProcessModel.normal(0, 1)
    assert borges_ho_c(m, SpecLimits(-3, 3)) == pytest.approx(1.0, rel=1e-13)
    # identical fraction defective gives identical C
    sk = ProcessModel.gamma(2.0, 1.0)
    spec = SpecLimits(0.05, 9.0)
    pi = yield_summary(sk, spec).p_nc
    half = stats.norm.isf(pi / 2)
    assert borges_ho_c(N01, SpecLimits(-half, half)) == pytest.approx(borges_ho_c(sk, spec), rel=1e-12)
    assert borges_ho_c(ProcessModel.uniform(0, 1), SpecLimits(0, 1)) == math.inf


@pytest.mark.parametrize("sigma", np.linspace(0.2, 5.0, 10))
def test_centered_normal_identity(sigma):
    spec = SpecLimits(-5.0, 5.0)
    cp = basic_indices(spec, ProcessMoments(0.0, sigma)).c_p
    assert borges_ho_c(ProcessModel.normal(0, sigma), spec) == pytest.approx(cp, rel=1e-9)
    assert s_pk(spec, ProcessMoments(0.0, sigma)) == pytest.approx(cp, rel=1e-9)


def test_borges_ho_increasing_in_yield():
    p = np.concatenate([np.linspace(0.5, 0.999, 200), 1 - np.logspace(-3.1, -9, 50)])
    half = stats.norm.isf((1 - p) / 2)
    values = [borges_ho_c(N01, SpecLimits(-h, h)) for h in half]
    assert np.all(np.diff(values) > 0)


def test_perakis():
    assert perakis_cpc(0.9973, N01, SpecLimits(-3, 3)) == pytest.approx(0.0027 / (2 * stats.norm.sf(3)),
                                                                      rel=1e-12)
    z = stats.norm.isf(0.005)
    assert perakis_cpc(0.9973, N01, SpecLimits(-z, z)) == pytest.approx(0.27, rel=1e-9)
    pois = perakis_cpc(0.9973, ProcessModel.poisson(10), SpecLimits(2, 20))
    assert math.isfinite(pois) and pois > 0
    assert perakis_cpc(0.9, ProcessModel.uniform(0, 1), SpecLimits(0, 1)) == math.inf


@given(st.floats(0.55, 0.999999), st.floats(0.5, 0.999))
@settings(max_examples=100, deadline=None)
def test_benchmark_ratios_cross_one_together(p, p0):
    h = stats.norm.isf((1 - p) / 2)
    spec = SpecLimits(-h, h)
    c = perakis_cpc(p0, N01, spec)
    r = yb_ratio(1 - p0, N01, spec)
    assert c == pytest.approx(r, rel=1e-12)
    assert (c > 1) == (p > p0) or abs(p - p0) < 1e-9


@given(st.floats(0.01, 100), st.floats(-100, 100))
@settings(max_examples=50, deadline=None)
def test_affine_invariance(a, b):
    model, spec = ProcessModel.normal(1.0, 2.0), SpecLimits(-4.0, 7.0)
    moved_model, moved_spec = ProcessModel.normal(a * 1.0 + b, a * 2.0), spec.affine(a, b)
    for fn in (lambda m, s: clements_cp(s, m), lambda m, s: borges_ho_c(m, s),
               lambda m, s: yb_ratio(0.0027, m, s), lambda m, s: perakis_cpc(0.9973, m, s),
               lambda m, s: yb_cf(0.001, 0.002, m, s)):
        assert fn(moved_model, moved_spec) == pytest.approx(fn(model, spec), rel=1e-10)


def test_desired_region():
    d = DesiredRegion()
    assert (d.alpha1, d.alpha2) == (0.00135, 0.00135)
    assert d.p0(N01) == pytest.approx(0.9973)
    lim = DesiredRegion.from_limits(-3, 3)
    assert lim.p0(N01) == pytest.approx(stats.norm.cdf(3) - stats.norm.cdf(-3), rel=1e-14)
    lo, hi = d.limits(N01)
    assert hi == pytest.approx(-lo) and hi == pytest.approx(stats.norm.isf(0.00135), rel=1e-12)
    for bad in [dict(alpha1=0.6, alpha2=0.5), dict(alpha1=-0.1), dict(ldl=1, udl=0), dict(ldl=0, alpha1=0.1)]:
        with pytest.raises(DomainError):
            DesiredRegion(**bad)
