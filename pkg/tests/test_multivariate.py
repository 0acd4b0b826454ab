import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, stats

from capq.dist_core import ProcessModel
from capq.errors import DomainError, NumericError
from capq.generalized import GeneralizedInputs, c_py
from capq.multivariate import (IndependentExtremeModel, MvNormal, MvSpec, StructuralFunction, chen_mcp,
                               chi_square_level, ellipsoid_volume, ellipsoid_volume_ratio, five_step_pipeline,
                               mv_generalized, shahriari_vector, structural_transform)
from capq.yield_based import DesiredRegion

MAX, MIN = StructuralFunction.maximum(), StructuralFunction.minimum()
SUM = StructuralFunction.weighted_sum([1.0, 1.0])
SPEC33 = MvSpec([-3, -3], [3, 3])
Phi = stats.norm.cdf


def test_structural_transform_examples():
    rows = np.array([[1.0, 2.0], [3.0, 0.0]])
    np.testing.assert_array_equal(structural_transform(rows, MAX), [2, 3])
    np.testing.assert_array_equal(structural_transform(rows, SUM), [3, 3])
    np.testing.assert_array_equal(structural_transform(rows, MIN), [1, 0])
    with pytest.raises(DomainError):
        structural_transform(np.ones((4, 3)), SUM)


def test_structural_validation():
    with pytest.raises(DomainError):
        StructuralFunction("median")
    with pytest.raises(DomainError):
        StructuralFunction.weighted_sum([1.0, float("inf")])
    with pytest.raises(DomainError):
        StructuralFunction("max", [1.0])
    assert SUM.label == "weighted_sum(1, 1)" and MAX.label == "max"


vec = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3)


@given(vec, vec, st.floats(-10, 10), st.floats(-10, 10), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
@settings(max_examples=200, deadline=None)
def test_weighted_sum_is_linear(x, y, a, b, w):
    N = StructuralFunction.weighted_sum(w)
    x, y = np.array(x), np.array(y)
    combo = N(np.array([a * x + b * y]))[0]
    assert combo == pytest.approx(a * N(x) + b * N(y), rel=1e-9, abs=1e-6)


@given(vec, st.lists(st.floats(0, 100), min_size=3, max_size=3), st.lists(st.floats(0, 5), min_size=3,
                                                                         max_size=3))
@settings(max_examples=200, deadline=None)
def test_conditional_ordering_monotone(x1, gaps, w):
    x1 = np.array(x1)
    x2 = x1.max() + np.array(gaps)  # every coordinate of x2 >= every coordinate of x1
    for N in (MAX, MIN, StructuralFunction.weighted_sum(w)):
        assert N(x1) <= N(x2) + 1e-9 * (1 + abs(N(x2)))


def test_mv_spec_validation():
    with pytest.raises(DomainError):
        MvSpec([0, 1], [1, 1])
    with pytest.raises(DomainError):
        MvSpec([0, 0], [1, 1, 1])
    with pytest.raises(DomainError):
        MvSpec([0, 0], [1, 1], [2, 0.5])
    s = MvSpec([0, -2], [4, 2])
    np.testing.assert_array_equal(s.midpoint, [2, 0])
    np.testing.assert_array_equal(s.half_width, [2, 2])


def test_mv_normal_validation():
    with pytest.raises(DomainError):
        MvNormal([0, 0], [[1, 0.5], [0.4, 1]])
    with pytest.raises(DomainError):
        MvNormal([0, 0], [[1, 2], [2, 1]])
    with pytest.raises(DomainError):
        MvNormal([0, 0], np.eye(3))
    m = MvNormal([1, 2], [[2, 0.3], [0.3, 1]])
    a = m.sample(100_000, seed=4)
    np.testing.assert_allclose(a.mean(axis=0), [1, 2], atol=0.02)
    np.testing.assert_allclose(np.cov(a, rowvar=False), m.cov, atol=0.03)


def test_mv_normal_sampling_independent_of_workers():
    m = MvNormal([0, 0], np.eye(2))
    np.testing.assert_array_equal(m.sample(200_000, 9, workers=1), m.sample(200_000, 9, workers=4))


def test_extreme_model_against_scipy():
    em = IndependentExtremeModel("max", [0.0, 1.0], [1.0, 2.0])
    y = np.linspace(-4, 9, 27)
    expected = Phi(y) * Phi((y - 1) / 2)
    np.testing.assert_allclose(em.cdf(y), expected, rtol=1e-13)
    np.testing.assert_allclose(em.sf(y), 1 - expected, rtol=1e-9, atol=1e-16)
    assert em.sf(8.0) == pytest.approx(stats.norm.sf(8) + stats.norm.sf(3.5) - stats.norm.sf(8) * stats.norm.sf(3.5),
                                       rel=1e-12)
    dens = (stats.norm.pdf(y) * Phi((y - 1) / 2) + stats.norm.pdf(y, 1, 2) * Phi(y))
    np.testing.assert_allclose(em.density(y), dens, rtol=1e-12, atol=1e-300)
    for u in (0.001, 0.5, 0.999):
        assert em.cdf(em.quantile(u)) == pytest.approx(u, rel=1e-10)
    draws = em.sample(400_000, 1)
    assert em.mean() == pytest.approx(draws.mean(), abs=4 * draws.std() / math.sqrt(draws.size))
    assert em.sd() == pytest.approx(draws.std(), rel=0.01)

    mn = IndependentExtremeModel("min", [0.0, 0.0], [1.0, 1.0])
    assert mn.cdf(0.3) == pytest.approx(1 - stats.norm.sf(0.3) ** 2, rel=1e-14)
    assert mn.mean() == pytest.approx(-1 / math.sqrt(math.pi), rel=1e-10)


def test_c_py_m_max_closed_form():
    res = mv_generalized(SPEC33, MAX, MvNormal([0, 0], np.eye(2)))
    expected = (Phi(3) ** 2 - Phi(-3) ** 2) / 0.9973
    assert res.c_py_M == pytest.approx(expected, rel=1e-12)
    assert res.c_py_M == pytest.approx(1.0, abs=1e-4)
    assert res.method == "closed_form" and res.standard_error == 0.0


def test_c_py_m_weighted_sum():
    res = mv_generalized(SPEC33, SUM, MvNormal([0, 0], np.eye(2)))
    expected = (2 * Phi(6 / math.sqrt(2)) - 1) / 0.9973
    assert res.c_py_M == pytest.approx(expected, rel=1e-12)
    assert res.c_py_M == pytest.approx(1.002685, abs=1e-6)
    assert (res.spec.lower, res.spec.upper) == (-6.0, 6.0)


def test_c_py_m_degenerate_dimension_one():
    mv = MvSpec([-2.0], [2.5])
    res = mv_generalized(mv, StructuralFunction.weighted_sum([1.0]), MvNormal([0.1], [[1.2]]))
    uni = c_py(GeneralizedInputs(mv_to_spec(mv), ProcessModel.normal(0.1, math.sqrt(1.2))))
    assert res.c_py_M == pytest.approx(uni, rel=1e-14)


def mv_to_spec(mv):
    from capq.classical import SpecLimits
    return SpecLimits(float(mv.lower[0]), float(mv.upper[0]))


def test_c_py_m_correlated_uses_monte_carlo():
    model = MvNormal([0, 0], [[1, 0.6], [0.6, 1]])
    res = mv_generalized(SPEC33, MAX, model, mc_n=400_000, seed=2)
    assert res.method == "monte_carlo" and res.standard_error > 0
    # independent oracle: bivariate normal rectangle probability P(X1 <= 3, X2 <= 3) - P(both <= -3)
    mvn = stats.multivariate_normal([0, 0], [[1, 0.6], [0.6, 1]])
    p = mvn.cdf([3, 3]) - mvn.cdf([-3, -3])
    assert abs(res.p - p) < 4 * math.sqrt(p * (1 - p) / 400_000)
    with pytest.raises(DomainError):
        mv_generalized(SPEC33, MAX, model)  # no seed


def test_c_py_m_errors_and_target():
    model = MvNormal([0, 0], np.eye(2))
    with pytest.raises(DomainError):
        mv_generalized(SPEC33, StructuralFunction.weighted_sum([1, -1]), model)
    with pytest.raises(DomainError):
        mv_generalized(MvSpec([-3, -3, -3], [3, 3, 3]), MAX, model)
    res = mv_generalized(MvSpec([-3, -3], [3, 3], [0.5, 0.5]), MAX, model)
    pivot = Phi(0.5) ** 2
    desired = DesiredRegion()
    assert res.c_pTk_M == pytest.approx(min((res.model.cdf(3.0) - pivot) / (0.5 - desired.alpha2),
                                            (pivot - res.model.cdf(-3.0)) / (0.5 - desired.alpha1)), rel=1e-12)


def test_ellipsoid_volume_ratio():
    r = chi_square_level(2)
    assert r == pytest.approx(11.829, abs=1e-2)
    assert r == pytest.approx(-2 * math.log(0.0027), rel=1e-12)
    assert ellipsoid_volume_ratio(2, r) == 1.0
    assert ellipsoid_volume_ratio(2, 2 * r) == pytest.approx(2.0, rel=1e-12)
    assert ellipsoid_volume_ratio(3, 4 * chi_square_level(3)) == pytest.approx(8.0, rel=1e-12)
    levels = np.linspace(0.5, 40, 50)
    vals = [ellipsoid_volume_ratio(MvNormal([0, 0, 0], np.eye(3)), x) for x in levels]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(DomainError):
        ellipsoid_volume_ratio(2, 0.0)


def test_ellipsoid_volume_matches_monte_carlo():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    level = 3.0
    exact = ellipsoid_volume(cov, level)
    assert exact == pytest.approx(math.pi * level * math.sqrt(np.linalg.det(cov)), rel=1e-12)
    rng = np.random.default_rng(0)
    box = 1.1 * np.sqrt(level * np.diag(cov))
    pts = rng.uniform(-box, box, size=(400_000, 2))
    inside = np.einsum("ij,jk,ik->i", pts, np.linalg.inv(cov), pts) <= level
    estimate = inside.mean() * np.prod(2 * box)
    assert estimate == pytest.approx(exact, rel=0.01)


def _chen_oracle_v2(sd, p_nc=0.0027):
    root = optimize.brentq(lambda r: (2 * Phi(r / sd) - 1) ** 2 - (1 - p_nc), 1e-6, 10)
    return 1 / root


def test_chen_univariate_reduction():
    d, sigma = 1.5, 0.5
    value = chen_mcp(MvNormal([0.0], [[sigma ** 2]]), MvSpec([-d], [d]), seed=5)
    assert value == pytest.approx(d / (3 * sigma), abs=0.01)


def test_chen_bivariate_oracle():
    value = chen_mcp(MvNormal([0, 0], np.eye(2) / 9), MvSpec([-1, -1], [1, 1]), seed=1)
    oracle = _chen_oracle_v2(1 / 3)
    assert oracle == pytest.approx(0.9356, abs=2e-3)
    assert value == pytest.approx(oracle, abs=0.01)


def test_chen_scaling_and_determinism():
    model = MvNormal([0, 0], np.eye(2) / 9)
    full = chen_mcp(model, MvSpec([-1, -1], [1, 1]), mc_n=200_000, seed=3)
    half = chen_mcp(model, MvSpec([-0.5, -0.5], [0.5, 0.5]), mc_n=200_000, seed=3)
    assert half == pytest.approx(full / 2, rel=1e-9)
    again = chen_mcp(model, MvSpec([-1, -1], [1, 1]), mc_n=200_000, seed=3, workers=3)
    assert again == full
    with pytest.raises(DomainError):
        chen_mcp(model, MvSpec([-1, -1], [1, 1]), mc_n=1000, seed=3)
    with pytest.raises(DomainError):
        chen_mcp(model, MvSpec([-1, -1], [1, 1]))


def test_chen_from_data():
    data = np.array([[0.1, 0.2], [-0.5, 0.4], [0.3, -0.9], [0.0, 0.0]])
    res = chen_mcp(data, MvSpec([-1, -1], [1, 1]), p_nc=0.2, details=True)
    # the 80% point of the per-row statistic (0.2, 0.5, 0.9, 0) is 0.9
    assert res.radius == pytest.approx(0.9, rel=1e-12)


def test_shahriari_examples():
    rng = np.random.default_rng(11)
    mv = MvSpec([-1, -1], [1, 1])
    data = rng.normal(0, 1 / 3, size=(400, 2))
    centered = data - data.mean(axis=0)
    sv = shahriari_vector(centered, mv, mc_n=200_000, seed=4)
    assert sv.t2 == pytest.approx(0.0, abs=1e-20) and sv.c2 == 1.0
    wide = shahriari_vector(data, MvSpec([-10, -10], [10, 10]), mc_n=200_000, seed=4)
    assert wide.c3 == 1
    # c1 is Chen's index of the fitted normal
    fitted = MvNormal(data.mean(axis=0), np.cov(data, rowvar=False))
    sv = shahriari_vector(data, mv, mc_n=200_000, seed=4)
    assert sv.c1 == chen_mcp(fitted, mv, mc_n=200_000, seed=4)
    assert sv.c1 == pytest.approx(_chen_oracle_v2(1 / 3), abs=0.05)


def test_shahriari_c2_against_scipy_and_monotone():
    rng = np.random.default_rng(2)
    base = rng.normal(0, 1, size=(60, 3))
    base -= base.mean(axis=0)
    mv = MvSpec([-5, -5, -5], [5, 5, 5])
    previous = 1.0
    for shift in np.linspace(0.05, 1.0, 12):
        data = base + shift * np.array([1.0, -0.5, 0.25])
        sv = shahriari_vector(data, mv, mc_n=100_000, seed=1)
        n, v = data.shape
        diff = data.mean(axis=0)
        t2 = n * diff @ np.linalg.solve(np.cov(data, rowvar=False), diff)
        assert sv.t2 == pytest.approx(t2, rel=1e-10)
        assert sv.c2 == pytest.approx(stats.f(v, n - v).sf((n - v) / (v * (n - 1)) * t2), rel=1e-9, abs=1e-300)
        assert 0 <= sv.c2 <= previous
        previous = sv.c2


def test_shahriari_box_containment():
    data = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.2]])
    mv = MvSpec([-50, -50], [50, 50])
    sv = shahriari_vector(data, mv, mc_n=100_000, seed=0)
    reach = np.sqrt(chi_square_level(2) * np.diag(np.cov(data, rowvar=False)))
    assert sv.box_scale == pytest.approx(max(reach / 50), rel=1e-12)
    tight = shahriari_vector(data, MvSpec([-0.2, -0.2], [1.2, 1.2]), mc_n=100_000, seed=0)
    assert tight.c3 == 0


def test_shahriari_errors():
    with pytest.raises(NumericError):
        shahriari_vector(np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]), MvSpec([0, 0], [9, 9]), mc_n=100_000,
                         seed=0)
    with pytest.raises(DomainError):
        shahriari_vector(np.ones((2, 2)), MvSpec([0, 0], [9, 9]), seed=0)


def test_pipeline_closed_form_check():
    rng = np.random.default_rng(20240611)
    data = rng.standard_normal((5000, 2))
    rep = five_step_pipeline(data, ["normal", "weibull", "lognormal"], [MAX], SPEC33)
    expected = (Phi(3) ** 2 - Phi(-3) ** 2) / 0.9973
    se = rep.indices.standard_error
    assert se > 0
    assert abs(rep.indices.c_py_M - expected) <= 3 * se
    assert len(rep.fits) == 3
    assert {f.family for f in rep.fits if f.error} == {"weibull", "lognormal"}


def test_pipeline_selects_and_reports():
    rng = np.random.default_rng(3)
    data = rng.gamma(4.0, 1.0, size=(500, 2))
    rep = five_step_pipeline(data, ["normal", "gamma", "lognormal"], [SUM, MAX], MvSpec([0, 0], [20, 20]))
    assert rep.adequate and rep.winner is not None
    scored = [f for f in rep.fits if f.adequate]
    assert rep.winner.ks == min(f.ks for f in scored)
    assert len(rep.fits) == 6


def test_pipeline_constant_columns_give_identical_scores():
    rng = np.random.default_rng(4)
    col = rng.normal(5, 1, 200)
    data = np.column_stack([col, col])
    rep = five_step_pipeline(data, ["normal"], [MAX, MIN], MvSpec([0, 0], [10, 10]))
    assert rep.fits[0].ks == rep.fits[1].ks


def test_pipeline_no_adequate_model_falls_back():
    rng = np.random.default_rng(5)
    data = np.column_stack([rng.uniform(0, 1, 3000), rng.uniform(0, 1, 3000)])
    rep = five_step_pipeline(data, ["exponential"], [SUM], MvSpec([0, 0], [1, 1]))
    assert not rep.adequate and rep.winner is None
    assert rep.warnings and "no adequate model" in rep.warnings[0]
    assert rep.indices.method == "empirical"


def test_pipeline_precondition():
    with pytest.raises(DomainError):
        five_step_pipeline(np.zeros((29, 2)), ["normal"], [MAX], SPEC33)
