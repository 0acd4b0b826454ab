import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from capq.classical import ProcessMoments, SpecLimits, basic_indices, quadratic_loss, s_pk, spiring_cpw, vannman
from capq.dist_core import ProcessModel
from capq.errors import ConfigError, DomainError

SPEC = SpecLimits(10.0, 30.0, 20.0)


def test_worked_example():
    idx = basic_indices(SpecLimits(10.0, 30.0), ProcessMoments(23.0, 3.0))
    assert idx.c_p == pytest.approx(20 / 18, abs=1e-12)
    assert idx.c_pk == pytest.approx(7 / 9, abs=1e-12)
    off = basic_indices(SPEC, ProcessMoments(23.0, 3.0))
    assert off.c_pm == pytest.approx(20 / (6 * math.sqrt(18)), abs=1e-12)
    assert round(off.c_pm, 4) == 0.7857
    assert round(off.c_pmk, 4) == 0.5500


def test_s_pk_against_scipy():
    mom = ProcessMoments(23.0, 3.0)
    a, b = 7 / 3, 13 / 3
    expected = stats.norm.ppf(0.5 * stats.norm.cdf(a) + 0.5 * stats.norm.cdf(b)) / 3
    assert s_pk(SPEC, mom) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0, 3.0, 5.0])
def test_s_pk_equals_c_p_when_centered(sigma):
    mom = ProcessMoments(20.0, sigma)
    assert s_pk(SPEC, mom) == pytest.approx(basic_indices(SPEC, mom).c_p, rel=1e-12)


def test_s_pk_infinite_for_vanishing_tails():
    assert s_pk(SPEC, ProcessMoments(20.0, 0.1)) == math.inf


def test_target_defaults_to_midpoint():
    no_t = basic_indices(SpecLimits(10.0, 30.0), ProcessMoments(23.0, 3.0))
    with_t = basic_indices(SPEC, ProcessMoments(23.0, 3.0))
    assert no_t == with_t
    with pytest.raises(ConfigError):
        basic_indices(SpecLimits(10.0, 30.0), ProcessMoments(23.0, 3.0), default_target=False)


configs = st.tuples(
    st.floats(-100, 100), st.floats(0.1, 100), st.floats(0.0, 1.0), st.floats(-0.5, 1.5), st.floats(0.01, 50),
)


def _build(cfg):
    lower, width, t_frac, mu_frac, sigma = cfg
    upper = lower + width
    spec = SpecLimits(lower, upper, lower + t_frac * width)
    return spec, ProcessMoments(lower + mu_frac * width, sigma)


@given(configs)
@settings(max_examples=300, deadline=None)
def test_vannman_specializations(cfg):
    spec, mom = _build(cfg)
    idx = basic_indices(spec, mom)
    # numerators differ in form; compare to a few ulps of the larger magnitude
    for (u, v), ref in [((0, 0), idx.c_p), ((1, 0), idx.c_pk), ((0, 1), idx.c_pm), ((1, 1), idx.c_pmk)]:
        assert vannman(spec, mom, u, v) == pytest.approx(ref, rel=1e-12, abs=1e-12 * max(1.0, idx.c_p))


@given(configs)
@settings(max_examples=300, deadline=None)
def test_ordering_chains(cfg):
    # the chains need mu inside [L, U]; outside, C_pk < 0 and dividing by the larger tau raises C_pmk
    lower, width, _, mu_frac, sigma = cfg
    assume(0.0 <= mu_frac <= 1.0)
    spec = SpecLimits(lower, lower + width)  # T = M
    mom = ProcessMoments(lower + mu_frac * width, sigma)
    i = basic_indices(spec, mom)
    tol = 1e-12 * max(1.0, abs(i.c_p))
    assert i.c_p + tol >= i.c_pk and i.c_pk + tol >= i.c_pmk
    assert i.c_p + tol >= i.c_pm and i.c_pm + tol >= i.c_pmk


@given(configs, st.floats(0.01, 100), st.floats(-50, 50))
@settings(max_examples=200, deadline=None)
def test_affine_invariance(cfg, scale, shift):
    spec, mom = _build(cfg)
    moved = ProcessMoments(scale * mom.mu + shift, scale * mom.sigma)
    a, b = basic_indices(spec, mom), basic_indices(spec.affine(scale, shift), moved)
    for x, y in zip(a, b):
        assert y == pytest.approx(x, rel=1e-9, abs=1e-9 * max(1.0, a.c_p))


@given(configs, st.floats(0, 10))
@settings(max_examples=200, deadline=None)
def test_spiring_matches_vannman(cfg, w):
    spec, mom = _build(cfg)
    assert spiring_cpw(spec, mom, quadratic_loss(w)) == pytest.approx(vannman(spec, mom, 0, w), rel=1e-12)


def test_spiring_loss_checks():
    mom = ProcessMoments(21.0, 2.0)
    with pytest.raises(DomainError):
        spiring_cpw(SPEC, mom, lambda d: 1.0 + d)
    with pytest.raises(DomainError):
        spiring_cpw(SPEC, mom, lambda d: -d * d)
    with pytest.raises(DomainError):
        quadratic_loss(-1)


def test_validation():
    with pytest.raises(DomainError):
        SpecLimits(30.0, 10.0)
    with pytest.raises(DomainError):
        SpecLimits(10.0, 30.0, 40.0)
    with pytest.raises(DomainError):
        SpecLimits(float("-inf"), 30.0)
    with pytest.raises(DomainError):
        ProcessMoments(20.0, 0.0)
    with pytest.raises(DomainError):
        vannman(SPEC, ProcessMoments(20.0, 1.0), -1, 0)


def test_moments_of_model():
    mom = ProcessMoments.of(ProcessModel.gamma(4.0, 2.0))
    assert mom.mu == pytest.approx(8.0) and mom.sigma == pytest.approx(4.0)
