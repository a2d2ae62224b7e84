import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmcf.exceptions import QuadratureError
from gmcf.kernels import (
    BSPLINE3,
    TRIANGLE,
    K_eval,
    K_layer,
    K_prime,
    ScaleCovariance,
    get_kernel,
    k_eval,
    verify_estimates,
)
from gmcf.quadrature import adaptive_simpson, integrate_pieces


def test_k_examples():
    assert k_eval(TRIANGLE, 0) == 1
    assert k_eval(TRIANGLE, 0.5) == 0.5
    assert k_eval(BSPLINE3, 1.2) == 0


@pytest.mark.parametrize("k", [TRIANGLE, BSPLINE3])
def test_kernel_shape(k):
    x = np.linspace(-1.5, 1.5, 3001)
    v = k.eval(x)
    assert k.eval(0.0) == 1.0
    np.testing.assert_array_equal(v, k.eval(-x))
    assert np.all(v[np.abs(x) >= 1] == 0)
    assert np.all(v >= 0)


@pytest.mark.parametrize("k", [TRIANGLE, BSPLINE3])
def test_deriv_sup_matches_dense_search(k):
    x = np.linspace(0, 1, 2_000_001)
    assert np.max(np.abs(k.deriv(x))) == pytest.approx(k.deriv_sup, rel=1e-9)


@pytest.mark.parametrize("k", [TRIANGLE, BSPLINE3])
def test_kernels_are_positive_definite_on_the_line(k):
    # nonnegative Fourier transform, sampled far beyond the support scale
    x = np.linspace(-1, 1, 20001)
    h = x[1] - x[0]
    for w in np.linspace(0, 200, 401):
        assert np.sum(k.eval(x) * np.cos(w * x)) * h > -1e-6


def test_bspline_smoothness():
    h = 1e-6
    for v in (0.0, 0.5, 1.0):
        left = (BSPLINE3.eval(v) - BSPLINE3.eval(v - h)) / h
        right = (BSPLINE3.eval(v + h) - BSPLINE3.eval(v)) / h
        assert abs(left - right) < 1e-4


def test_K_examples(tri):
    assert K_eval(tri, 2, 0) == 2
    assert K_eval(tri, 2, math.exp(-2)) == pytest.approx(2 - (1 - math.exp(-2)), abs=1e-12)
    assert K_eval(tri, 2, math.exp(-2)) == pytest.approx(1.13534, abs=1e-5)
    assert K_eval(tri, 1, 1) == 0


def test_K_layer_examples(tri, bsp):
    assert K_layer(tri, 1, 3, 0) == 2
    assert K_layer(tri, 0, 2.5, 0.1) == pytest.approx(K_eval(tri, 2.5, 0.1), abs=1e-14)
    v = K_layer(tri, 2, 5, math.exp(-3))
    assert abs(v - 1) <= math.e * TRIANGLE.deriv_sup
    with pytest.raises(ValueError):
        K_layer(tri, 3, 2, 0.1)
    assert abs(K_layer(bsp, 6, 9, math.exp(-8)) - 2) <= math.e * BSPLINE3.deriv_sup


def test_K_prime_examples(tri, bsp):
    assert K_prime(tri, 2, 0.5) == pytest.approx(-1.0, abs=1e-12)
    assert K_prime(bsp, 1, 1.5) == 0
    assert K_prime(bsp, 3, 0.0) == 0
    with pytest.raises(ValueError):
        K_prime(tri, 2, 0.0)


@pytest.mark.parametrize("name", ["triangle", "bspline3"])
def test_closed_form_matches_quadrature(name):
    cf = ScaleCovariance(get_kernel(name))
    qd = ScaleCovariance(get_kernel(name), method="quadrature")
    for t in (0.3, 1.0, 2.5, 6.0):
        for d in (0.0, 1e-4, 0.01, 0.2, 0.37, 0.5, 0.99, 1.5):
            assert cf.K(t, d) == pytest.approx(qd.K(t, d), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0, 10), d=st.floats(0, 2), name=st.sampled_from(["triangle", "bspline3"]))
def test_K_range_and_symmetry(t, d, name):
    cov = ScaleCovariance(get_kernel(name))
    v = cov.K(t, d)
    assert -1e-12 <= v <= t + 1e-12
    assert v == cov.K(t, -d)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(0, 6), w=st.floats(0, 4), d=st.floats(0, 1))
def test_K_monotone_in_t(s, w, d):
    cov = ScaleCovariance(BSPLINE3)
    assert cov.K(s + w, d) >= cov.K(s, d) - 1e-12


@pytest.mark.parametrize("name", ["triangle", "bspline3"])
def test_K_nonincreasing_in_gap(name):
    cov = ScaleCovariance(get_kernel(name))
    d = np.linspace(0, 1.2, 4001)
    for t in (0.5, 2.0, 7.0):
        assert np.all(np.diff(cov.K(t, d)) <= 1e-13)


def test_derivative_consistency(bsp):
    h = 1e-5
    for t, d in [(1.0, 0.2), (2.0, 0.05), (3.0, 0.3)]:
        fd = (bsp.K(t, d + h) - bsp.K(t, d - h)) / (2 * h)
        assert K_prime(bsp, t, d) == pytest.approx(fd, abs=1e-7)
        assert K_prime(bsp, t, d) == pytest.approx(bsp.K_prime_quad(t, d), abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0, 8), d=st.floats(1e-6, 2), name=st.sampled_from(["triangle", "bspline3"]))
def test_K_prime_bound(t, d, name):
    cov = ScaleCovariance(get_kernel(name))
    assert abs(cov.K_prime(t, d)) <= math.exp(t) * cov.kernel.deriv_sup * (1 + 1e-12)


def test_verify_estimates():
    tri = verify_estimates(ScaleCovariance(TRIANGLE), [0])
    assert tri.rows[0]["dev_K"] <= tri.bound
    for k in (TRIANGLE, BSPLINE3):
        rep = verify_estimates(ScaleCovariance(k), range(1, 13))
        assert rep.passed
        assert rep.max_deviation() <= math.e * k.deriv_sup


def test_time_derivative(bsp):
    h = 1e-6
    for u, d in [(0.5, 0.1), (2.0, 0.03)]:
        fd = (bsp.K(u + h, d) - bsp.K(u - h, d)) / (2 * h)
        assert bsp.time_derivative(u, d) == pytest.approx(fd, abs=1e-6)


def test_adaptive_simpson():
    assert adaptive_simpson(math.sin, 0, math.pi) == pytest.approx(2.0, abs=1e-10)
    assert adaptive_simpson(lambda x: x * x, 1, 0) == pytest.approx(-1 / 3, abs=1e-12)
    assert integrate_pieces(abs, [-1, 0, 1]) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(QuadratureError) as exc:
        adaptive_simpson(lambda x: 1 / x if x else 0.0, 0, 1, max_depth=8)
    assert exc.value.achieved > 0
