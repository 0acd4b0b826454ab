import math
import os

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from capq import kernels
from capq.kernels import BACKEND, available_backends

mpmath.mp.dps = 40


def test_compiled_backend_is_active_when_built():
    assert BACKEND in ("cython", "python")
    if os.environ.get("CAPQ_PURE_PYTHON"):
        assert BACKEND == "python"
    elif "cython" in available_backends():
        assert BACKEND == "cython"


@pytest.mark.parametrize("x", [-38.0, -20.0, -8.0, -3.0, -1e-3, 0.0, 0.5, 3.0, 8.0])
def test_ndtr_against_mpmath(backend, x):
    exact = float(mpmath.ncdf(x))
    # rounding of x / sqrt(2) costs about x^2 ulps in the far tail
    rel = max(1e-14, 4e-16 * x * x)
    assert backend.ndtr(np.array([x]))[0] == pytest.approx(exact, rel=rel, abs=0)


def test_ndtr_vs_scipy_grid(backend):
    x = np.linspace(-30, 10, 4001)
    np.testing.assert_allclose(backend.ndtr(x), special.ndtr(x), rtol=5e-13, atol=0)


@pytest.mark.parametrize("p", [1e-300, 1e-100, 1e-20, 1e-9, 0.00135, 0.02425, 0.3, 0.5, 0.7, 0.99865,
                               1 - 1e-10])
def test_ndtri_against_mpmath(backend, p):
    # mpmath has no ndtri; invert the exact CDF
    exact = float(mpmath.findroot(lambda z: mpmath.ncdf(z) - p, special.ndtri(p)))
    assert backend.ndtri(np.array([p]))[0] == pytest.approx(exact, rel=2e-15, abs=1e-15)


def test_ndtri_edges(backend):
    out = backend.ndtri(np.array([0.0, 1.0, -0.1, 1.1, np.nan]))
    assert out[0] == -np.inf and out[1] == np.inf
    assert np.all(np.isnan(out[2:]))


@given(st.floats(min_value=-37.0, max_value=0.0))
@settings(max_examples=300, deadline=None)
def test_ndtri_inverts_ndtr(x):
    # lower tail only: above 0 the rounding of p itself dominates
    p = kernels.norm_cdf(x)
    assert kernels.norm_ppf(p) == pytest.approx(x, rel=1e-12, abs=1e-12)
    assert kernels.norm_isf(kernels.norm_sf(-x)) == pytest.approx(-x, rel=1e-12, abs=1e-12)


def test_norm_isf_upper_tail_precision():
    # sf(8) ~ 6.2e-16 would be lost as 1 - cdf(8)
    q = kernels.norm_sf(8.0)
    assert kernels.norm_isf(q) == pytest.approx(8.0, rel=1e-13)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.5, 10.0, 150.0])
def test_gamma_incomplete_vs_scipy(backend, a):
    x = np.concatenate([np.linspace(0, 5 * a + 20, 301)[1:], [1e-8, a, a + 1]])
    np.testing.assert_allclose(backend.gammainc(a, x), special.gammainc(a, x), rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(backend.gammaincc(a, x), special.gammaincc(a, x), rtol=1e-12, atol=1e-300)


def test_gamma_incomplete_against_mpmath(backend):
    for a, x in [(0.5, 50.0), (3.0, 0.01), (40.0, 90.0)]:
        upper = float(mpmath.gammainc(a, x, mpmath.inf, regularized=True))
        assert backend.gammaincc(a, np.array([x]))[0] == pytest.approx(upper, rel=1e-12)


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (1.0, 3.0), (2.5, 7.5), (30.0, 2.0), (200.0, 150.0)])
def test_betainc_vs_scipy(backend, a, b):
    x = np.linspace(0, 1, 401)
    np.testing.assert_allclose(backend.betainc(a, b, x), special.betainc(a, b, x), rtol=1e-11, atol=1e-300)


def test_backends_agree(rng):
    found = available_backends()
    if len(found) < 2:
        pytest.skip("compiled backend not built")
    cy, py = found["cython"], found["python"]
    x = rng.normal(0, 5, 2000)
    p = rng.uniform(0, 1, 2000)
    np.testing.assert_allclose(cy.ndtr(x), py.ndtr(x), rtol=1e-15)
    np.testing.assert_allclose(cy.ndtri(p), py.ndtri(p), rtol=1e-15)
    g = rng.gamma(3.0, 2.0, 2000)
    np.testing.assert_allclose(cy.gammainc(2.7, g), py.gammainc(2.7, g), rtol=1e-14)
    np.testing.assert_allclose(cy.betainc(2.0, 5.0, p), py.betainc(2.0, 5.0, p), rtol=1e-13)
    X = rng.normal(size=(500, 3))
    c, d = np.array([0.1, 0.0, -0.2]), np.array([1.0, 2.0, 0.5])
    np.testing.assert_array_equal(cy.scaled_max_abs(X, c, d), py.scaled_max_abs(X, c, d))
    vals = rng.normal(size=50)
    idx = rng.integers(0, 50, size=(30, 50))
    for a, b in zip(cy.resample_mean_sd(vals, idx), py.resample_mean_sd(vals, idx)):
        np.testing.assert_allclose(a, b, rtol=1e-12)


def test_scaled_max_abs(backend):
    X = np.array([[1.0, 2.0], [3.0, 0.0], [-4.0, 1.0]])
    out = backend.scaled_max_abs(X, np.array([0.0, 0.0]), np.array([1.0, 4.0]))
    np.testing.assert_array_equal(out, [1.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        backend.scaled_max_abs(X, np.zeros(3), np.ones(3))


def test_fraction_le(backend):
    v = np.array([0.5, 1.0, 1.5, 2.0])
    assert backend.fraction_le(v, 1.0) == 0.5
    assert backend.fraction_le(v, -1.0) == 0.0
    assert backend.fraction_le(v, 2.0) == 1.0


def test_resample_mean_sd(backend):
    vals = np.array([1.0, 2.0, 4.0, 8.0])
    idx = np.array([[0, 1, 2, 3], [3, 3, 0, 0]])
    means, sds = backend.resample_mean_sd(vals, idx)
    np.testing.assert_allclose(means, [3.75, 4.5])
    np.testing.assert_allclose(sds, [np.std(vals, ddof=1), np.std([8, 8, 1, 1], ddof=1)])
    with pytest.raises(IndexError):
        backend.resample_mean_sd(vals, np.array([[0, 4, 1, 1]]))


def test_scalar_wrappers_return_floats():
    assert isinstance(kernels.norm_cdf(0.0), float)
    assert kernels.norm_cdf(np.zeros((2, 3))).shape == (2, 3)
    assert math.isclose(kernels.gammainc(1.0, 1.0), 1 - math.exp(-1), rel_tol=1e-15)
