"""Fourier coefficients of discretised measures and their second moments.

Coefficients use the 1-periodic convention ``c_n = sum_i e^{2 pi i n theta_i} m_i``
with ``theta_i = i / N``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import QuadratureError
from .gmc import GmcParams, GmcWeights, GoodEventParams
from .validation import check_masses

__all__ = [
    "FourierCoefficients",
    "RegionSplit",
    "fourier_coeffs",
    "coefficients",
    "exact_second_moment",
    "autocorrelation",
    "region_contributions",
    "FourierTransformer",
]


@dataclass
class FourierCoefficients:
    values: np.ndarray

    @property
    def n_max(self):
        return self.values.shape[-1] - 1

    def __getitem__(self, n):
        return self.values[..., n]


@dataclass(frozen=True)
class RegionSplit:
    """Pair-sum contributions of far (I) and near (II) point pairs."""

    delta_n: float
    C_I: complex
    C_II: complex

    @property
    def total(self):
        return self.C_I + self.C_II


def coefficients(masses, n_max):
    """Array form of :func:`fourier_coeffs`; works on stacked rows."""
    m = check_masses(masses)
    N = m.shape[-1]
    if n_max >= N // 2:
        raise ValueError(f"n_max={n_max} aliases on N={N} points (need n_max < {N // 2})")
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    # e^{+2 pi i n j / N} is the conjugate of numpy's forward kernel
    return np.conj(np.fft.rfft(m, axis=-1)[..., : n_max + 1])


def fourier_coeffs(w, n_max) -> FourierCoefficients:
    masses = w.masses if isinstance(w, GmcWeights) else w
    return FourierCoefficients(coefficients(masses, int(n_max)))


def _breaks(cov, t):
    """Points in ``(0, 1/2)`` where ``K_t(d)`` is not smooth."""
    pts = {0.0, 0.5}
    for q in cov.kernel.knots:
        for d in (q * math.exp(-t), q):
            if 0.0 < d < 0.5:
                pts.add(d)
    return sorted(pts)


def exact_second_moment(cov, params: GmcParams, n, N=None, tol=1e-10):
    """``E|c_{n,t}|^2`` with no good event.

    Equals ``norm^2 int_0^1 cos(2 pi n D) e^{gamma^2 K_t(d(D))} dD``. With
    ``N`` given the integral is replaced by the exact grid sum
    ``norm^2 / N sum_j cos(2 pi n j / N) e^{gamma^2 K_t(d_j)}``, which is the
    second moment of the discretised measure itself.
    """
    n = int(n)
    g2 = params.gamma**2
    t = params.t
    scale = params.norm**2
    if scale == 0.0:
        return 0.0
    if N is not None:
        j = np.arange(int(N))
        d = np.minimum(j, N - j) / N
        vals = np.exp(g2 * np.asarray(cov.K(t, d), dtype=float))
        return float(scale * np.dot(np.cos(2 * math.pi * n * j / N), vals) / N)

    def f(x):
        return math.exp(g2 * float(cov.K(t, x)))

    pts = _breaks(cov, t)
    total = 0.0
    err = 0.0
    share = tol / (len(pts) - 1)
    for a, b in zip(pts[:-1], pts[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                if n == 0:
                    v, e = integrate.quad(f, a, b, epsabs=share, epsrel=1e-12, limit=500)
                else:
                    v, e = integrate.quad(f, a, b, weight="cos", wvar=2 * math.pi * n,
                                          epsabs=share, epsrel=1e-12, limit=500)
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(f"second-moment quadrature failed: {exc}") from None
        total += v
        err += e
    if err > max(tol, 1e-9 * abs(total)):
        raise QuadratureError("second-moment quadrature missed its tolerance", achieved=err)
    return float(2.0 * scale * total)


def autocorrelation(masses):
    """Circular autocorrelation ``R[l] = sum_i m_i m_{i+l}`` via two FFTs."""
    m = np.asarray(masses, dtype=float)
    F = np.fft.rfft(m, axis=-1)
    return np.fft.irfft(F * np.conj(F), n=m.shape[-1], axis=-1)


def region_contributions(w, mask, n, gp: GoodEventParams) -> RegionSplit:
    """Split ``|c_n|^2`` of the restricted measure by the circle gap of each pair.

    Region I collects ordered pairs with gap in ``[delta_n, 1/2]`` where
    ``delta_n = e n^-delta``; region II the rest.
    """
    masses = w.masses if isinstance(w, GmcWeights) else np.asarray(w, dtype=float)
    wt = np.where(np.asarray(mask, dtype=bool), masses, 0.0)
    N = wt.size
    delta_n = math.e * float(n) ** (-gp.delta)
    lag = np.arange(N)
    gap = np.minimum(lag, N - lag) / N
    terms = np.exp(2j * math.pi * n * lag / N) * autocorrelation(wt)
    far = gap >= delta_n
    return RegionSplit(delta_n, complex(terms[far].sum()), complex(terms[~far].sum()))


class FourierTransformer(TransformerMixin, BaseEstimator):
    """Rows of cell masses to complex coefficients ``c_0 .. c_{n_max}``.

    ``modulus=True`` returns ``|c_n|`` instead.
    """

    def __init__(self, n_max=64, modulus=False):
        self.n_max = n_max
        self.modulus = modulus

    def fit(self, X=None, y=None):
        if X is not None:
            N = np.asarray(X).shape[-1]
            if self.n_max >= N // 2:
                raise ValueError(f"n_max={self.n_max} aliases on N={N} points")
        self.n_max_ = int(self.n_max)
        return self

    def transform(self, X):
        c = coefficients(np.atleast_2d(X), int(self.n_max))
        return np.abs(c) if self.modulus else c
