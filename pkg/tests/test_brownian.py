import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmcf.brownian import (
    BarrierQuery,
    barrier_from_e,
    bridge_ballot,
    bridge_ballot_quad,
    max_cdf,
    mc_barrier,
    norm_cdf,
    sweep_ballot_bound,
    sweep_barrier_bound,
)
from gmcf.rng import mc_rng

E = math.e


def test_max_cdf_examples():
    assert max_cdf(0, 1) == 0
    assert max_cdf(1, 1) == pytest.approx(0.68269, abs=1e-5)
    assert max_cdf(math.inf, 3) == 1
    assert max_cdf(60, 1) == 1.0


def test_norm_cdf_tails():
    assert float(norm_cdf(-30)) == pytest.approx(4.906713927148187e-198, rel=1e-12)
    assert float(norm_cdf(0)) == 0.5


def test_barrier_from_e_examples():
    assert barrier_from_e(2, E + 1e-12) == pytest.approx(float(norm_cdf(2 / math.sqrt(E))),
                                                          abs=1e-6)
    with pytest.raises(ValueError):
        barrier_from_e(1, 2.0)


def test_bridge_examples():
    assert bridge_ballot(1, 1, 2) == pytest.approx(1 - math.exp(-1), abs=1e-15)
    assert bridge_ballot(1e-12, 1, 2) < 1e-11
    with pytest.raises(ValueError):
        bridge_ballot(1, 1, 2, window="from_e")


@pytest.mark.parametrize("a,b,t", [(1, 1, 2), (0.3, 2, 5), (5, 5, 1e4), (0.5, 0.5, 3.7),
                                   (2, 0.1, 0.5)])
def test_full_ballot_by_conditioning(a, b, t):
    assert bridge_ballot_quad(a, b, t) == pytest.approx(bridge_ballot(a, b, t), abs=1e-8)
    assert bridge_ballot_quad(a, b, t, u=0.3 * t) == pytest.approx(bridge_ballot(a, b, t),
                                                                   abs=1e-8)


@pytest.mark.parametrize("a,b,t", [(1, 1, 5), (0.5, 3, 20), (4, 0.5, 100)])
def test_from_e_ballot_closed_form(a, b, t):
    # E[1 - e^{-cX}; X > 0] for X ~ N(mu, v) in closed form
    mu = a + (b - a) * E / t
    v = E * (t - E) / t
    c = 2 * b / (t - E)
    sd = math.sqrt(v)
    cf = float(norm_cdf(mu / sd)) - math.exp(-c * mu + c * c * v / 2) * float(
        norm_cdf((mu - c * v) / sd))
    assert bridge_ballot(a, b, t, "from_e") == pytest.approx(cf, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.05, 5), da=st.floats(0, 2), t=st.floats(3, 200), dt=st.floats(0, 50),
       b=st.floats(0.05, 5))
def test_monotonicity(a, da, t, dt, b):
    assert 0 <= barrier_from_e(a, t) <= barrier_from_e(a + da, t) + 1e-12
    assert barrier_from_e(a, t + dt) <= barrier_from_e(a, t) + 1e-12
    assert 0 <= max_cdf(a, t) <= max_cdf(a + da, t) + 1e-15 <= 1 + 1e-15
    for w in ("full", "from_e"):
        p = bridge_ballot(a, b, t, w)
        assert 0 <= p <= bridge_ballot(a + da, b, t, w) + 1e-12 <= 1 + 1e-12
        assert p <= bridge_ballot(a, b + da, t, w) + 1e-12


def test_bound_sweeps():
    assert sweep_barrier_bound().passed
    assert sweep_ballot_bound().passed
    assert not sweep_barrier_bound(constant=0.5).passed


@pytest.mark.parametrize("kind,q,exact", [
    ("max", BarrierQuery(1, 1), max_cdf(1, 1)),
    ("from_e", BarrierQuery(2, 4), barrier_from_e(2, 4)),
    ("bridge", BarrierQuery(1, 2, 1), bridge_ballot(1, 1, 2)),
    ("bridge_from_e", BarrierQuery(1, 4, 1), bridge_ballot(1, 1, 4, "from_e")),
])
def test_mc_agrees_up_to_monitoring_bias(kind, q, exact):
    est, se = mc_barrier(q, 1e-3, 20000, mc_rng(0, 1), kind)
    # discrete monitoring only misses crossings, so the walk overestimates
    assert -4 * se <= est - exact <= 4 * se + 0.02


def test_mc_bias_shrinks_with_dt():
    q = BarrierQuery(1, 1)
    exact = max_cdf(1, 1)
    coarse = mc_barrier(q, 1e-2, 40000, mc_rng(1), "max")[0] - exact
    fine = mc_barrier(q, 1e-3, 40000, mc_rng(1), "max")[0] - exact
    assert coarse > fine


def test_mc_validation():
    with pytest.raises(ValueError):
        mc_barrier(BarrierQuery(1, 1), 0.05, 10, mc_rng(0), "max")
    with pytest.raises(ValueError):
        mc_barrier(BarrierQuery(1, 1), 1e-3, 10, mc_rng(0), "sideways")
    with pytest.raises(ValueError):
        mc_barrier(BarrierQuery(1, 2), 1e-3, 10, mc_rng(0), "from_e")
