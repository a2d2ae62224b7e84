"""Two-point quantities: the auxiliary function F, its bound, and helpers.

``F_{n,t}(D) = t e^{-2t} E[1{both points good} e^{sqrt2 (X_t(0) + X_t(D))}]``
is estimated by importance sampling under the exponentially tilted path
law, where the weight collapses to a constant and only the good event is
left random.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from sklearn.base import BaseEstimator

from .brownian import norm_cdf
from .exceptions import QuadratureError, UndefinedSlopeError
from .field import _n_steps, sample_two_point, two_point_increment_covariances
from .gmc import GoodEventParams, U_of_t, m_of_t
from .validation import SQRT2, check_scalar

__all__ = [
    "BranchingContext",
    "FBoundParams",
    "FEstimate",
    "branching_time",
    "slope",
    "girsanov_shift",
    "Q_indicator_prob",
    "estimate_F",
    "F_shape",
    "F_bound",
    "FBoundCalibrator",
    "UnstableEstimateWarning",
]

MIN_ESS = 100.0


class UnstableEstimateWarning(RuntimeWarning):
    """Importance weights too concentrated for a trustworthy estimate."""


def branching_time(t, n, delta, gap):
    """``t ^ (log(1/gap) v r_n)`` with ``r_n = delta log n``."""
    gap = check_scalar(gap, "gap", lo=0.0, lo_open=True)
    r_n = delta * math.log(n)
    if t < r_n:
        raise ValueError(f"t={t} is below r_n={r_n:.4g}")
    return min(t, max(-math.log(gap), r_n))


def slope(r_gap, r_n):
    """Slope of the linear barrier over a window of length ``r_gap - r_n >= e``."""
    w = r_gap - r_n
    if w < math.e * (1 - 1e-12):
        raise UndefinedSlopeError(f"slope needs r_gap - r_n >= e, got {w:.4g}")
    return SQRT2 - math.log(w) / (2 * SQRT2 * w)


@dataclass(frozen=True)
class BranchingContext:
    """Scales attached to a pair of points at distance ``gap``."""

    n: int
    t: float
    delta: float
    gap: float

    @property
    def r_n(self):
        return self.delta * math.log(self.n)

    @property
    def r_gap(self):
        return branching_time(self.t, self.n, self.delta, self.gap)

    @property
    def alpha(self) -> Optional[float]:
        w = self.r_gap - self.r_n
        return slope(self.r_gap, self.r_n) if w >= math.e * (1 - 1e-12) else None


@dataclass(frozen=True)
class FBoundParams:
    C: float

    def __post_init__(self):
        check_scalar(self.C, "C", lo=0.0, lo_open=True)


def girsanov_shift(cov, r_n, gap):
    """Mean of ``X_{r_n}(0)`` after tilting by ``e^{sqrt2 (X_t(0) + X_t(gap))}``."""
    r_n = check_scalar(r_n, "r_n", lo=0.0)
    return SQRT2 * (r_n + float(cov.K(r_n, abs(gap))))


def Q_indicator_prob(cov, gp: GoodEventParams, gap, K=None):
    """``P(X_1 <= H, X_2 <= H)`` for the centred pair with variance ``r_n``.

    The covariance is ``K_{r_n}(gap)`` unless ``K`` is given, and
    ``H = -sqrt2 K - 3/(2 sqrt2) log r_n + A``. Integrates the conditional
    normal CDF of ``X_2`` against the density of ``X_1``.
    """
    r = gp.r_n
    if r < 1:
        raise ValueError(f"r_n={r:.4g} must be at least 1")
    K = float(cov.K(r, abs(gap))) if K is None else float(K)
    if abs(K) > r * (1 + 1e-12):
        raise ValueError(f"covariance {K} exceeds variance r_n={r}")
    H = -SQRT2 * K - 1.5 / SQRT2 * math.log(r) + gp.A
    if math.isinf(H):
        return 1.0
    sd = math.sqrt(r)
    rho = max(-1.0, min(1.0, K / r))
    if rho >= 1 - 1e-14:
        return float(norm_cdf(H / sd))
    cond_sd = sd * math.sqrt(1 - rho * rho)

    def f(x):
        return math.exp(-0.5 * x * x / r) / (sd * math.sqrt(2 * math.pi)) * float(
            norm_cdf((H - rho * x) / cond_sd))

    lo = min(H, -12 * sd)
    v, err = integrate.quad(f, lo, H, epsabs=1e-13, epsrel=1e-11, limit=400)
    if err > 1e-9:
        raise QuadratureError("bivariate probability quadrature did not converge", achieved=err)
    return min(1.0, max(0.0, v))


@dataclass(frozen=True)
class FEstimate:
    """Importance-sampling estimate of ``F``; unpacks as ``(estimate, stderr)``."""

    estimate: float
    stderr: float
    ess: float
    n_good: int
    replicas: int

    @property
    def unstable(self):
        return self.ess < MIN_ESS

    def __iter__(self):
        return iter((self.estimate, self.stderr))


def _barriers(gp, t, dt, M):
    """Per-time barrier arrays for the discretised good event.

    Returns ``(j, m_bar, u_bar)``: the step index of the rounded ``r_n``,
    the bound on ``X_r`` and, for steps ``k > j``, the bound on
    ``X_{k dt} - X_r`` (``inf`` where inactive).
    """
    j = int(math.floor(gp.r_n / dt + 1e-9))
    r = j * dt
    m_bar = m_of_t(r) + gp.A if r > 0 else math.inf
    s = (np.arange(M + 1) - j) * dt
    u_bar = np.full(M + 1, np.inf)
    after = np.arange(M + 1) > j
    u_bar[after] = U_of_t(s[after]) + gp.A
    return j, m_bar, u_bar


def estimate_F(cov, gp: GoodEventParams, t, gap, dt, replicas, rng, chunk=4096) -> FEstimate:
    """Importance-sampled ``F_{n,t}(gap)`` with its standard error.

    Paths are drawn under the exact exponential tilt by
    ``e^{sqrt2 (X_t(0) + X_t(gap))}``: each step's increments gain the mean
    ``sqrt2 (dt + c)`` on both coordinates, where ``c`` is the step
    cross-covariance. Coupled steps (``c = dt``) thus drift by ``2 sqrt2 dt``
    and decoupled ones by ``sqrt2 dt`` each. The likelihood ratio times the
    integrand is the constant ``e^{2t + 2 K_t(gap)}``, so the estimate is
    ``t e^{2 K_t(gap)}`` times the tilted frequency of the good event.

    The good event is checked at every step after the rounded ``r_n``.
    An effective sample size below 100 emits :class:`UnstableEstimateWarning`.
    """
    gap = check_scalar(gap, "gap", lo=0.0, lo_open=True, hi=1.0)
    t = check_scalar(t, "t", lo=gp.r_n + 1)
    M = _n_steps(t, dt)
    c = two_point_increment_covariances(cov, gap, dt, t)
    drift = np.concatenate([[0.0], np.cumsum(SQRT2 * (dt + c))])
    j, m_bar, u_bar = _barriers(gp, t, dt, M)
    active = np.isfinite(u_bar)

    n_good = 0
    done = 0
    while done < replicas:
        P = min(chunk, replicas - done)
        paths = sample_two_point(cov, gap, dt, t, rng, n_paths=P).paths
        paths += drift
        x1, x2 = paths[:, 0], paths[:, 1]
        good = (x1[:, j] <= m_bar) & (x2[:, j] <= m_bar)
        if active.any():
            bar = u_bar[active]
            good &= np.all(x1[:, active] - x1[:, j:j + 1] <= bar, axis=1)
            good &= np.all(x2[:, active] - x2[:, j:j + 1] <= bar, axis=1)
        n_good += int(good.sum())
        done += P

    # sum of the step covariances is K_t(gap) on the nose
    log_weight = math.log(t) + 2 * float(np.sum(c))
    p = n_good / replicas
    weight = math.exp(log_weight)
    res = FEstimate(weight * p, weight * math.sqrt(p * (1 - p) / replicas), float(n_good),
                    n_good, replicas)
    if res.unstable:
        warnings.warn(f"effective sample size {res.ess:.1f} below {MIN_ESS:g} at gap={gap:.3g}",
                      UnstableEstimateWarning, stacklevel=2)
    return res


def F_shape(ctx: BranchingContext):
    """``F_bound`` with ``C = 1``.

    The logarithmic factor ``min(log(w)^5 / w^2, 1)`` with ``w = r_gap - r_n``
    is replaced by 1 when ``w < e``, where the slope is undefined.
    """
    lo, hi = math.exp(-ctx.t), math.e * ctx.n ** (-ctx.delta)
    if not lo * (1 - 1e-12) <= ctx.gap <= hi * (1 + 1e-12):
        raise ValueError(f"gap={ctx.gap:.4g} outside [{lo:.4g}, {hi:.4g}]")
    r_n, r_gap = ctx.r_n, ctx.r_gap
    w = r_gap - r_n
    log_factor = 1.0 if w < math.e else min(math.log(w) ** 5 / w**2, 1.0)
    return (1 / r_n**2) * (ctx.t / (ctx.t - r_gap + 1)) * log_factor / ctx.gap


def F_bound(ctx: BranchingContext, fb: FBoundParams):
    return fb.C * F_shape(ctx)


class FBoundCalibrator(BaseEstimator):
    """Fit the bound constant on pilot estimates, then evaluate the bound.

    ``fit(gaps, estimates)`` sets ``C_`` to the largest ratio of estimate
    to bound shape; ``predict(gaps)`` returns ``C_ * shape``.
    """

    def __init__(self, n=256, t=12.0, delta=0.2):
        self.n = n
        self.t = t
        self.delta = delta

    def _shape(self, gaps):
        return np.array([F_shape(BranchingContext(self.n, self.t, self.delta, float(g)))
                         for g in np.ravel(gaps)])

    def fit(self, gaps, estimates):
        ratio = np.asarray(estimates, dtype=float) / self._shape(gaps)
        self.C_ = float(np.max(ratio))
        if not self.C_ > 0:
            raise ValueError("pilot estimates give no positive bound constant")
        return self

    def predict(self, gaps):
        return self.C_ * self._shape(gaps)
