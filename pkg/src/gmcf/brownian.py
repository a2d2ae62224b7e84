"""Barrier and ballot probabilities for standard Brownian motion.

Closed forms come from the reflection principle; the variants that only
watch the window ``[e, t]`` condition on ``B_e`` and integrate. The random
walk estimator :func:`mc_barrier` is the independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .exceptions import QuadratureError
from .validation import check_scalar

__all__ = [
    "BarrierQuery",
    "norm_cdf",
    "max_cdf",
    "barrier_from_e",
    "bridge_ballot",
    "bridge_ballot_quad",
    "mc_barrier",
    "SweepResult",
    "sweep_barrier_bound",
    "sweep_ballot_bound",
    "KINDS",
]

E = math.e
KINDS = ("max", "from_e", "bridge", "bridge_from_e")


def norm_cdf(x):
    """Standard normal CDF through ``erfc`` (accurate in both tails)."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def _norm_pdf(x, var):
    return math.exp(-0.5 * x * x / var) / math.sqrt(2 * math.pi * var)


@dataclass(frozen=True)
class BarrierQuery:
    """Barrier height ``a``, bridge endpoint ``b`` and horizon ``t``."""

    a: float
    t: float
    b: float = 0.0

    def __post_init__(self):
        check_scalar(self.a, "a", lo=0.0)
        check_scalar(self.b, "b", lo=0.0)
        check_scalar(self.t, "t", lo=0.0, lo_open=True)


def max_cdf(a, t):
    """``P(sup_{s <= t} B_s <= a) = 2 Phi(a / sqrt t) - 1``."""
    a = check_scalar(a, "a", lo=0.0)
    t = check_scalar(t, "t", lo=0.0, lo_open=True)
    if math.isinf(a):
        return 1.0
    return float(special.erf(a / math.sqrt(2 * t)))


def _quad(f, a, b, tol):
    v, err = integrate.quad(f, a, b, epsabs=tol, epsrel=1e-12, limit=400)
    if not math.isfinite(v) or err > max(10 * tol, 1e-10):
        raise QuadratureError(f"quadrature on [{a}, {b}] reached only {err:.2e}", achieved=err)
    return v


def barrier_from_e(a, t, tol=1e-12):
    """``P(sup_{s in [e, t]} B_s <= a)`` for Brownian motion started at 0.

    Conditions on ``B_e = a - y`` and integrates the reflection formula for
    the remaining window over ``y > 0``.
    """
    a = check_scalar(a, "a", lo=0.0, lo_open=True)
    t = check_scalar(t, "t", lo=E, lo_open=True)
    w = t - E
    scale = math.sqrt(2 * w)

    def f(y):
        return _norm_pdf(a - y, E) * math.erf(y / scale)

    # the erf factor rises from 0 on the scale sqrt(w); resolve that first
    knee = min(8 * math.sqrt(w), a + 40 * math.sqrt(E))
    return min(1.0, _quad(f, 0.0, knee, tol) + _quad(f, knee, math.inf, tol))


def bridge_ballot(a, b, t, window="full"):
    """Probability that a Brownian bridge from ``a`` to ``b`` stays nonnegative.

    ``window='full'`` watches ``[0, t]`` and returns ``1 - exp(-2ab/t)``;
    ``window='from_e'`` only watches ``[e, t]`` and integrates the full
    formula against the law of ``B_e``.
    """
    a = check_scalar(a, "a", lo=0.0)
    b = check_scalar(b, "b", lo=0.0)
    t = check_scalar(t, "t", lo=0.0, lo_open=True)
    if window == "full":
        return float(-math.expm1(-2 * a * b / t))
    if window != "from_e":
        raise ValueError(f"window must be 'full' or 'from_e', got {window!r}")
    if t <= E:
        raise ValueError(f"t must exceed e for the [e, t] window, got {t}")
    mu = a + (b - a) * E / t
    var = E * (t - E) / t
    rest = t - E
    return _integrate_positive(lambda x: -math.expm1(-2 * x * b / rest), mu, var)


def _integrate_positive(g, mu, var, tol=1e-12):
    """``E[g(X); X > 0]`` for ``X ~ N(mu, var)``, split around the bulk."""
    sd = math.sqrt(var)

    def f(x):
        return _norm_pdf(x - mu, var) * g(x)

    lo, hi = max(0.0, mu - 12 * sd), max(0.0, mu + 12 * sd)
    pts = sorted({0.0, lo, max(0.0, mu), hi})
    total = sum(_quad(f, p, q, tol) for p, q in zip(pts[:-1], pts[1:]) if q > p)
    return min(1.0, total + _quad(f, hi, math.inf, tol))


def bridge_ballot_quad(a, b, t, u=None):
    """Full-window ballot probability by conditioning on ``B_u`` (default ``t/2``)."""
    u = 0.5 * t if u is None else float(u)
    if not 0 < u < t:
        raise ValueError("need 0 < u < t")
    mu = a + (b - a) * u / t
    var = u * (t - u) / t
    return _integrate_positive(
        lambda x: -math.expm1(-2 * a * x / u) * -math.expm1(-2 * x * b / (t - u)), mu, var
    )


# --- Monte Carlo --------------------------------------------------------


def mc_barrier(query: BarrierQuery, dt, replicas, rng, kind="max", chunk=1 << 15):
    """Random-walk estimate of a barrier or ballot event, with its stderr.

    ``kind`` is one of ``max``, ``from_e`` (sup over ``[e, t]``),
    ``bridge`` (bridge from ``a`` to ``b`` stays ``>= 0``) or
    ``bridge_from_e``. The path is observed on the grid ``k dt`` only, so
    the estimate carries an ``O(sqrt dt)`` monitoring bias that
    overstates the probability of staying inside.
    """
    dt = check_scalar(dt, "dt", lo=0.0, lo_open=True, hi=1e-2)
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    M = int(round(query.t / dt))
    if abs(M * dt - query.t) > 1e-9 * query.t:
        raise ValueError(f"t={query.t} is not a multiple of dt={dt}")
    start = 0
    if kind.endswith("from_e"):
        if query.t <= E:
            raise ValueError("t must exceed e")
        start = math.ceil(E / dt - 1e-9)
    hits = 0
    done = 0
    while done < replicas:
        P = min(chunk, replicas - done)
        if kind.startswith("bridge"):
            ok = _bridge_chunk(query, dt, M, start, P, rng)
        else:
            ok = _walk_chunk(query.a, dt, M, start, P, rng)
        hits += int(ok.sum())
        done += P
    p = hits / replicas
    return p, math.sqrt(max(p * (1 - p), 0.0) / replicas)


def _walk_chunk(a, dt, M, start, P, rng):
    z = np.empty(P, dtype=np.float32)
    rng.standard_normal(out=z, dtype=np.float32)
    x = z * np.float32(math.sqrt(max(start, 1) * dt))
    if start == 0:
        start = 1
    top = x.copy()
    sd = np.float32(math.sqrt(dt))
    for _ in range(start, M):
        rng.standard_normal(out=z, dtype=np.float32)
        z *= sd
        x += z
        np.maximum(top, x, out=top)
    return top <= a


def _bridge_chunk(q, dt, M, start, P, rng):
    """Exact bridge values on the grid via sequential conditional steps."""
    T = q.t
    z = np.empty(P, dtype=np.float32)
    x = np.full(P, q.a, dtype=np.float32)
    low = x.copy() if start == 0 else np.full(P, np.inf, dtype=np.float32)
    k = 0
    if start > 0:
        h = start * dt
        rng.standard_normal(out=z, dtype=np.float32)
        x = x + np.float32((q.b - q.a) * h / T) + z * np.float32(math.sqrt(h * (T - h) / T))
        low = np.minimum(low, x)
        k = start
    while k < M - 1:
        rem = T - k * dt
        rng.standard_normal(out=z, dtype=np.float32)
        x += (np.float32(q.b) - x) * np.float32(dt / rem)
        x += z * np.float32(math.sqrt(dt * (rem - dt) / rem))
        np.minimum(low, x, out=low)
        k += 1
    return (low >= 0) & (q.b >= 0)


# --- bound sweeps -------------------------------------------------------


@dataclass(frozen=True)
class SweepResult:
    """Largest normalised probability found on a grid, and where."""

    worst: float
    where: tuple
    constant: float

    @property
    def passed(self):
        return self.worst <= self.constant


A_GRID = tuple(np.linspace(0.5, 5.0, 10))
T_GRID = tuple(np.geomspace(E + 1, 1e4, 15))


def sweep_barrier_bound(a_grid=A_GRID, t_grid=T_GRID, constant=3.0):
    """``max barrier_from_e(a, t) (sqrt t + 1) / (a + 1)`` over the grid."""
    worst, where = -math.inf, None
    for a in a_grid:
        for t in t_grid:
            v = barrier_from_e(a, t) * (math.sqrt(t) + 1) / (a + 1)
            if v > worst:
                worst, where = v, (float(a), float(t))
    return SweepResult(worst, where, constant)


def sweep_ballot_bound(a_grid=A_GRID, t_grid=T_GRID, b_grid=None, constant=3.0):
    """``max bridge_ballot(a, b, t, 'from_e') (t + 1) / ((a + 1)(b + 1))`` over the grid."""
    b_grid = a_grid if b_grid is None else b_grid
    worst, where = -math.inf, None
    for a in a_grid:
        for b in b_grid:
            for t in t_grid:
                v = bridge_ballot(a, b, t, "from_e") * (t + 1) / ((a + 1) * (b + 1))
                if v > worst:
                    worst, where = v, (float(a), float(b), float(t))
    return SweepResult(worst, where, constant)
