import math

import numpy as np
import pytest
from sklearn.pipeline import Pipeline

from gmcf.field import LayeredFieldSample, StarScaleField, TimeGrid
from gmcf.fourier import FourierTransformer, coefficients
from gmcf.gmc import (
    GmcParams,
    GmcTransformer,
    GmcWeights,
    GoodEventParams,
    U_of_t,
    gmc_weights,
    good_event,
    good_set_mask,
    m_of_t,
    restricted_measure,
)

SQRT2 = math.sqrt(2)


def test_m_examples():
    assert m_of_t(1) == pytest.approx(SQRT2, abs=1e-15)
    assert m_of_t(4) == pytest.approx(4.18646, abs=1e-5)
    assert m_of_t(math.e) == pytest.approx(2.78357, abs=1e-5)
    with pytest.raises(ValueError):
        m_of_t(0)


def test_U_examples():
    assert U_of_t(1) == math.inf
    assert U_of_t(math.e) == pytest.approx(3.49068, abs=1e-5)
    # U(t) - sqrt2 t = 4/sqrt2 log log t - log t / (2 sqrt2), positive once
    # 8 log log t > log t, i.e. for log t roughly in (1.15, 26)
    t = np.geomspace(math.e, 1e6, 20001)
    L = np.log(t)
    np.testing.assert_allclose(U_of_t(t) - SQRT2 * t,
                               4 / SQRT2 * np.log(L) - L / (2 * SQRT2), atol=1e-6)
    assert U_of_t(math.e) < SQRT2 * math.e
    assert U_of_t(1e6) > SQRT2 * 1e6


def test_params():
    assert GmcParams(SQRT2, 2).critical and GmcParams(SQRT2, 4).norm == 2
    assert not GmcParams(1.0, 2).critical
    for bad in (0.0, 1.5):
        with pytest.raises(ValueError):
            GmcParams(bad, 1)
    gp = GoodEventParams(8, 0.2, 256)
    assert gp.r_n == pytest.approx(0.2 * math.log(256))
    for kw in ({"delta": 0.25}, {"n": 1}, {"A": 0}):
        with pytest.raises(ValueError):
            GoodEventParams(**{"A": 1, "delta": 0.2, "n": 4, **kw})


def _zero_sample(N=16, t=4.0):
    tg = TimeGrid.uniform(t, 0.25)
    return LayeredFieldSample(np.zeros((tg.n_layers, N)), tg)


def test_degenerate_field_masses():
    s = _zero_sample()
    for g in (0.7, SQRT2):
        p = GmcParams(g, 4.0)
        w = gmc_weights(s, p)
        np.testing.assert_allclose(w.masses, p.norm * math.exp(-g * g * 2.0) / 16, rtol=1e-14)
    with pytest.raises(ValueError):
        gmc_weights(s, GmcParams(1.0, 3.0))


def test_overflow_guard():
    w = gmc_weights(np.array([1e6, 0.0]), GmcParams(SQRT2, 1.0))
    assert w.masses[0] == math.exp(700.0)
    with pytest.raises(FloatingPointError):
        gmc_weights(np.array([np.nan, 0.0]), GmcParams(SQRT2, 1.0))


def test_good_set_trivial_cases():
    s = _zero_sample()
    assert good_set_mask(s, GoodEventParams(math.inf, 0.2, 64)).all()
    assert good_set_mask(s, GoodEventParams(0.01, 0.2, 64)).all()
    with pytest.raises(ValueError):
        good_set_mask(_zero_sample(t=0.5), GoodEventParams(1, 0.2, 10**6))


def test_good_set_barriers_bite():
    tg = TimeGrid.uniform(6.0, 0.25)
    inc = np.zeros((tg.n_layers, 4))
    j = tg.floor_index(0.2 * math.log(256))
    inc[j - 1, 0] = 50.0  # point 0 breaks the first barrier
    inc[-1, 1] = 50.0  # point 1 breaks the late barrier (U finite after e)
    inc[2, 2] = -50.0
    m = good_set_mask(LayeredFieldSample(inc, tg), GoodEventParams(1.0, 0.2, 256))
    assert m.tolist() == [False, False, True, True]
    assert not good_event(m)


def test_good_event_and_restriction():
    assert good_event(np.ones(5, bool))
    assert not good_event(np.array([True, False, True]))
    w = GmcWeights(np.array([0.1, 0.2, 0.3]))
    assert restricted_measure(w, np.ones(3, bool)).masses.tolist() == w.masses.tolist()
    assert restricted_measure(w, np.zeros(3, bool)).total_mass() == 0
    with pytest.raises(ValueError):
        restricted_measure(w, np.ones(4, bool))


def test_good_set_monotone_in_A():
    f = StarScaleField(horizon=6, n_points=512).fit()
    for r in range(10):
        s = f.sample(1, r)
        prev = None
        for A in (0.1, 0.5, 1, 2, 4):
            m = good_set_mask(s, GoodEventParams(A, 0.2, 64))
            if prev is not None:
                assert np.all(m >= prev)
            prev = m
        w = gmc_weights(s, GmcParams(SQRT2, 6))
        assert restricted_measure(w, prev).total_mass() <= w.total_mass()


@pytest.mark.slow
def test_good_probability_stable_under_refinement():
    # P(all points good) at N and 2N agree within 4 combined standard errors
    gp = GoodEventParams(10, 0.2, 256)
    freq = []
    R = 300
    for N in (1 << 16, 1 << 17):
        f = StarScaleField(horizon=8, n_points=N).fit()
        freq.append(np.mean([good_event(good_set_mask(f.sample(3, r), gp)) for r in range(R)]))
    p = np.mean(freq)
    se = math.sqrt(max(p * (1 - p), 1 / R) * 2 / R)
    assert abs(freq[0] - freq[1]) <= 4 * se


def _masses(f, gamma, R, seed=0):
    p = GmcParams(gamma, f.time_grid_.horizon)
    return np.stack([gmc_weights(f.sample_terminal(seed, r), p).masses for r in range(R)])


def test_mean_mass_and_second_moment(tri):
    from gmcf.fourier import exact_second_moment

    f = StarScaleField(horizon=2, n_points=64).fit()
    R = 20000
    for g, target in ((0.8, 1.0), (SQRT2, SQRT2)):
        tot = _masses(f, g, R).sum(axis=1)
        assert abs(tot.mean() - target) < 4 * tot.std() / math.sqrt(R)
    tot = _masses(f, 0.8, R, seed=1).sum(axis=1)
    exact = exact_second_moment(tri, GmcParams(0.8, 2.0), 0)
    sq = tot**2
    assert abs(sq.mean() - exact) < 4 * sq.std() / math.sqrt(R)


def test_transformer_pipeline():
    f = StarScaleField(horizon=3, n_points=64).fit()
    X = np.stack([f.sample_terminal(0, r) for r in range(4)])
    pipe = Pipeline([("gmc", GmcTransformer(gamma=1.0, horizon=3.0)),
                     ("fourier", FourierTransformer(n_max=5, modulus=True))])
    out = pipe.fit_transform(X)
    direct = np.abs(coefficients(gmc_weights(X, GmcParams(1.0, 3.0)).masses, 5))
    np.testing.assert_allclose(out, direct)
    assert pipe.get_params()["gmc__gamma"] == 1.0
