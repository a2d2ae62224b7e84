import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gmcf.field import StarScaleField
from gmcf.fourier import (
    autocorrelation,
    coefficients,
    exact_second_moment,
    fourier_coeffs,
    region_contributions,
)
from gmcf.gmc import GmcParams, GmcWeights, GoodEventParams, gmc_weights

SQRT2 = math.sqrt(2)
masses = arrays(np.float64, st.sampled_from([8, 16, 64]),
                elements=st.floats(0, 10, allow_nan=False))


def test_uniform_and_point_mass():
    c = fourier_coeffs(GmcWeights(np.full(64, 1 / 64)), 31)
    assert c[0] == pytest.approx(1)
    assert np.max(np.abs(c.values[1:])) < 1e-15
    pm = np.zeros(64)
    pm[0] = 2.5
    np.testing.assert_allclose(np.abs(coefficients(pm, 31)), 2.5)
    with pytest.raises(ValueError):
        coefficients(pm, 32)


def test_matches_naive_sum():
    f = StarScaleField(horizon=5, n_points=256).fit()
    m = gmc_weights(f.sample(0, 0), GmcParams(0.5, 5.0)).masses
    theta = np.arange(256) / 256
    c = coefficients(m, 100)
    for n in range(101):
        naive = np.sum(np.exp(2j * math.pi * n * theta) * m)
        assert abs(abs(c[n]) - abs(naive)) <= 1e-10 * abs(naive) + 1e-15
        assert abs(c[n] - naive) <= 1e-10 * abs(c[0])


@settings(max_examples=50, deadline=None)
@given(m=masses)
def test_parseval_and_bounds(m):
    N = m.size
    c = np.conj(np.fft.fft(m))  # all n in one period
    assert np.sum(np.abs(c) ** 2) == pytest.approx(N * np.sum(m**2), rel=1e-10, abs=1e-12)
    half = coefficients(m, N // 2 - 1)
    assert half[0].real == pytest.approx(m.sum())
    assert np.all(np.abs(half) <= half[0].real * (1 + 1e-12) + 1e-12)


@settings(max_examples=50, deadline=None)
@given(m=masses, data=st.data())
def test_region_split_adds_up(m, data):
    N = m.size
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=N, max_size=N)))
    n = data.draw(st.integers(2, N // 2 - 1)) if N > 8 else 2
    gp = GoodEventParams(1.0, 0.2, max(n, 2))
    rs = region_contributions(GmcWeights(m), mask, n, gp)
    direct = abs(coefficients(np.where(mask, m, 0), N // 2 - 1)[n]) ** 2
    assert rs.total.real == pytest.approx(direct, rel=1e-9, abs=1e-9)
    # positivity transfer: 1{good} |c_n(mu)|^2 <= |c_n(restricted)|^2
    full = abs(coefficients(m, N // 2 - 1)[n]) ** 2
    assert (full if mask.all() else 0.0) <= direct + 1e-9 * max(1, full)


def test_region_split_examples():
    f = StarScaleField(horizon=8, n_points=4096).fit()
    m = gmc_weights(f.sample(0, 3), GmcParams(SQRT2, 8.0)).masses
    gp = GoodEventParams(1.0, 0.2, 100)
    assert region_contributions(GmcWeights(m), np.zeros(4096, bool), 100, gp).total == 0
    mask = np.random.default_rng(0).random(4096) < 0.9
    rs = region_contributions(GmcWeights(m), mask, 100, gp)
    direct = abs(coefficients(np.where(mask, m, 0), 100)[100]) ** 2
    assert abs(rs.total - direct) <= 1e-9 * direct
    assert rs.delta_n == pytest.approx(math.e * 100**-0.2)
    tiny = region_contributions(GmcWeights(m), mask, 2, GoodEventParams(1.0, 0.2, 2))
    assert tiny.delta_n > 0.5 and tiny.C_I == 0


def test_autocorrelation_naive():
    m = np.random.default_rng(1).random(16)
    R = autocorrelation(m)
    naive = [sum(m[i] * m[(i + k) % 16] for i in range(16)) for k in range(16)]
    np.testing.assert_allclose(R, naive, rtol=1e-12)


def test_second_moment_examples(tri):
    assert exact_second_moment(tri, GmcParams(SQRT2, 0.0), 5) == 0
    v = exact_second_moment(tri, GmcParams(0.8, 3.0), 0)
    assert v >= 1
    # n = 0 equals the second moment of total mass by direct quadrature
    from scipy.integrate import quad

    direct = 2 * quad(lambda d: math.exp(0.64 * tri.K(3.0, d)), 0, 0.5, points=[math.exp(-3)])[0]
    assert v == pytest.approx(direct, rel=1e-9)
    for n in (1, 4, 16, 64):
        a = exact_second_moment(tri, GmcParams(SQRT2, 2.0), n)
        b = exact_second_moment(tri, GmcParams(SQRT2, 2.0), n, N=4096)
        assert a == pytest.approx(b, rel=1e-2)


def test_second_moment_mc(tri):
    f = StarScaleField(horizon=2, n_points=256).fit()
    p = GmcParams(SQRT2, 2.0)
    R = 30000
    sq = np.empty(R)
    for r in range(R):
        sq[r] = abs(coefficients(gmc_weights(f.sample_terminal(4, r), p).masses, 8)[8]) ** 2
    exact = exact_second_moment(tri, p, 8)
    assert abs(sq.mean() - exact) < 4 * sq.std() / math.sqrt(R)
