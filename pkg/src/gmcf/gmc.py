"""Discretised chaos measures, barrier functions and the good-set mask."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import SQRT2, check_masses, check_scalar, is_critical

__all__ = [
    "GmcParams",
    "GmcWeights",
    "GoodEventParams",
    "m_of_t",
    "U_of_t",
    "gmc_weights",
    "log_masses",
    "good_set_mask",
    "good_event",
    "restricted_measure",
    "GmcTransformer",
]

EXP_CLAMP = 700.0
_LOG_TOL = 0.25 + 1e-9  # how far r_n may sit above its grid level


@dataclass(frozen=True)
class GmcParams:
    gamma: float
    t: float

    def __post_init__(self):
        check_scalar(self.gamma, "gamma", lo=0.0, lo_open=True, hi=SQRT2 + 1e-12)
        check_scalar(self.t, "t", lo=0.0)

    @property
    def critical(self):
        return is_critical(self.gamma)

    @property
    def norm(self):
        return math.sqrt(self.t) if self.critical else 1.0


@dataclass
class GmcWeights:
    """Cell masses of a discretised measure on ``N`` equispaced points."""

    masses: np.ndarray

    def __post_init__(self):
        self.masses = check_masses(self.masses)

    @property
    def N(self):
        return self.masses.shape[-1]

    def total_mass(self):
        return self.masses.sum(axis=-1)


@dataclass(frozen=True)
class GoodEventParams:
    """Barrier offset ``A``, exponent ``delta`` and frequency ``n``.

    ``A = inf`` switches the good event off.
    """

    A: float
    delta: float
    n: int
    r_n: float = field(init=False)

    def __post_init__(self):
        check_scalar(self.A, "A", lo=0.0, lo_open=True)
        check_scalar(self.delta, "delta", lo=0.0, hi=0.25, lo_open=True, hi_open=True)
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "r_n", self.delta * math.log(self.n))


def m_of_t(t):
    """Typical maximum level ``sqrt(2) t - 3/(2 sqrt 2) log t``."""
    t = check_scalar(t, "t", lo=0.0, lo_open=True)
    return SQRT2 * t - 1.5 / SQRT2 * math.log(t)


def U_of_t(t):
    """Upper barrier: ``+inf`` before ``e``, then ``sqrt2 t - log t/(2 sqrt2) + 4/sqrt2 log log t``."""
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, np.inf)
    ok = t >= math.e
    tt = t[ok]
    out[ok] = SQRT2 * tt - np.log(tt) / (2 * SQRT2) + 4 / SQRT2 * np.log(np.log(tt))
    return out[()] if out.ndim == 0 else out


def log_masses(values, params: GmcParams):
    """``log`` of the cell masses for terminal field values ``values``."""
    x = np.asarray(values, dtype=float)
    N = x.shape[-1]
    g = params.gamma
    with np.errstate(divide="ignore"):
        lognorm = math.log(params.norm) if params.norm > 0 else -math.inf
    return lognorm + g * x - 0.5 * g * g * params.t - math.log(N)


def _exp_masses(logm):
    m = np.exp(np.minimum(logm, EXP_CLAMP))
    if not np.all(np.isfinite(m)):
        raise FloatingPointError("GMC mass overflowed after clamping")
    return m


def gmc_weights(sample, params: GmcParams) -> GmcWeights:
    """Masses ``norm * exp(gamma X_t - gamma^2 t / 2) / N`` for a field sample.

    ``sample`` is a :class:`~gmcf.field.LayeredFieldSample` or a bare array
    of terminal values (in which case the horizon is taken on trust).
    """
    if hasattr(sample, "terminal"):
        if abs(sample.horizon - params.t) > 1e-9 * max(1.0, params.t):
            raise ValueError(f"params.t={params.t} differs from sample horizon {sample.horizon}")
        values = sample.terminal()
    else:
        values = sample
    return GmcWeights(_exp_masses(log_masses(values, params)))


def _r_level(time_grid, r_n):
    if r_n > time_grid.horizon + 1e-9:
        raise ValueError(f"r_n={r_n:.4g} exceeds the horizon {time_grid.horizon:g}")
    j = time_grid.floor_index(r_n)
    if r_n - time_grid.levels[j] > _LOG_TOL:
        raise ValueError(f"no time level within 0.25 below r_n={r_n:.4g}")
    return j


def good_set_mask(sample, gp: GoodEventParams):
    """Points whose trajectory respects both barriers of the good event.

    ``X_{r}(theta) <= m(r) + A`` at the grid level ``r`` just below
    ``r_n``, and ``X_s^{(r)}(theta) <= U(s) + A`` at every later grid level.
    """
    tg = sample.time_grid
    j = _r_level(tg, gp.r_n)
    N = sample.N
    if math.isinf(gp.A):
        return np.ones(N, dtype=bool)
    cum = sample.cumulative()
    r = tg.levels[j]
    mask = np.ones(N, dtype=bool)
    if r > 0:
        mask &= cum[j] <= m_of_t(r) + gp.A
    s = np.asarray(tg.levels[j + 1:]) - r
    bar = U_of_t(s) + gp.A
    for k in np.flatnonzero(np.isfinite(bar)):
        mask &= (cum[j + 1 + k] - cum[j]) <= bar[k]
    return mask


def good_event(mask):
    return bool(np.all(mask))


def restricted_measure(w: GmcWeights, mask) -> GmcWeights:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != w.masses.shape[-1:]:
        raise ValueError(f"mask shape {mask.shape} does not match {w.masses.shape[-1:]}")
    return GmcWeights(np.where(mask, w.masses, 0.0))


class GmcTransformer(TransformerMixin, BaseEstimator):
    """Map rows of terminal field values to GMC cell masses.

    Stateless: ``fit`` only validates the parameters. Composes with
    other transformers in a :class:`sklearn.pipeline.Pipeline`.
    """

    def __init__(self, gamma=SQRT2, horizon=6.0):
        self.gamma = gamma
        self.horizon = horizon

    def fit(self, X=None, y=None):
        self.params_ = GmcParams(float(self.gamma), float(self.horizon))
        return self

    def transform(self, X):
        if not hasattr(self, "params_"):
            self.fit()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return _exp_masses(log_masses(X, self.params_))
