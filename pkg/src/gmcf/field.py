"""Sampling the layered field on the circle and two-point path processes.

The field ``X_t`` is built from independent layers: the increment
``X_{t_j} - X_{t_{j-1}}`` is a stationary Gaussian field on the discrete
circle with covariance ``K_{t_j} - K_{t_{j-1}}`` evaluated at arc distance.
Each layer is drawn by circulant spectral synthesis: the covariance row is
diagonalised by the DFT, and independent Gaussians scaled by the square
root of the eigenvalues are sent through an inverse real FFT.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import PositiveDefinitenessError, ResolutionError
from .kernels import ScaleCovariance, get_kernel
from .quadrature import integrate_pieces
from .rng import ReplicaStream
from .validation import check_power_of_two, check_scalar, required_points

__all__ = [
    "TimeGrid",
    "SpatialGrid",
    "LayeredFieldSample",
    "ShiftedView",
    "TwoPointPathSample",
    "layer_spectrum",
    "StarScaleField",
    "sample_field",
    "shifted_view",
    "sample_two_point",
    "two_point_increment_covariances",
    "residual_variance",
    "save_sample",
    "load_sample",
]

NEG_TOL = 1e-8


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing field times ``0 = t_0 < t_1 < ... < t_L``."""

    levels: tuple

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        if lv.ndim != 1 or lv.size < 2:
            raise ValueError("a time grid needs at least two levels")
        if lv[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if np.any(np.diff(lv) <= 0):
            raise ValueError("time grid levels must be strictly increasing")
        object.__setattr__(self, "levels", tuple(float(x) for x in lv))

    @classmethod
    def uniform(cls, horizon, width=0.25):
        """Levels ``0, w, 2w, ...`` up to ``horizon`` (last layer may be shorter)."""
        horizon = check_scalar(horizon, "horizon", lo=0.0, lo_open=True)
        width = check_scalar(width, "width", lo=0.0, lo_open=True)
        n = int(math.floor(horizon / width + 1e-9))
        lv = [k * width for k in range(n + 1)]
        if horizon - lv[-1] > 1e-9 * max(1.0, horizon):
            lv.append(horizon)
        else:
            lv[-1] = horizon
        return cls(tuple(lv))

    @property
    def horizon(self):
        return self.levels[-1]

    @property
    def n_layers(self):
        return len(self.levels) - 1

    def as_array(self):
        return np.asarray(self.levels)

    def floor_index(self, time):
        """Index of the last level ``<= time`` (small tolerance for round-off)."""
        lv = self.as_array()
        idx = int(np.searchsorted(lv, time + 1e-9, side="right") - 1)
        if idx < 0:
            raise ValueError(f"time {time} precedes the grid")
        return idx


@dataclass(frozen=True)
class SpatialGrid:
    """``N = 2^m`` equispaced points ``i / N`` on the unit circle."""

    N: int

    def __post_init__(self):
        check_power_of_two(self.N)

    @property
    def points(self):
        return np.arange(self.N) / self.N

    def lag_distance(self):
        """Arc distance ``d(0, j) = min(j, N - j) / N`` for every lag ``j``."""
        j = np.arange(self.N)
        return np.minimum(j, self.N - j) / self.N

    def distance(self, i, j):
        k = np.abs(np.asarray(i) - np.asarray(j)) % self.N
        return np.minimum(k, self.N - k) / self.N


@dataclass
class LayeredFieldSample:
    """One joint realisation of ``X_{t_j}(theta_i)`` stored as layer increments.

    ``increments[j]`` is ``X_{t_{j+1}} - X_{t_j}`` on the spatial grid.
    """

    increments: np.ndarray
    time_grid: TimeGrid
    kernel: str = "triangle"
    seed: int = 0
    replica: int = 0
    _cum: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def N(self):
        return self.increments.shape[1]

    @property
    def n_layers(self):
        return self.increments.shape[0]

    @property
    def horizon(self):
        return self.time_grid.horizon

    def cumulative(self):
        """``(L + 1, N)`` array of ``X_{t_j}``; row 0 is identically zero."""
        if self._cum is None:
            cum = np.empty((self.n_layers + 1, self.N))
            cum[0] = 0.0
            # row-wise adds beat an axis-0 cumsum by a wide margin
            for j in range(self.n_layers):
                np.add(cum[j], self.increments[j], out=cum[j + 1])
            self._cum = cum
        return self._cum

    def level(self, j):
        return self.cumulative()[j]

    def terminal(self):
        return self.cumulative()[-1]


class ShiftedView:
    """Value view of ``X^{(r)}_s = X_{r+s} - X_r`` over the levels after ``r``."""

    def __init__(self, sample: LayeredFieldSample, r_level: int):
        if not 0 <= r_level <= sample.n_layers:
            raise IndexError(f"r_level {r_level} outside 0..{sample.n_layers}")
        self.sample = sample
        self.r_level = r_level
        lv = sample.time_grid.as_array()
        self.times = lv[r_level:] - lv[r_level]

    def cumulative(self):
        """``(L - r_level + 1, N)`` array; row ``k`` is ``X^{(r)}`` at ``times[k]``."""
        cum = self.sample.cumulative()
        return cum[self.r_level:] - cum[self.r_level]

    def at(self, k):
        cum = self.sample.cumulative()
        return cum[self.r_level + k] - cum[self.r_level]


def shifted_view(sample, r_level):
    return ShiftedView(sample, r_level)


def layer_spectrum(cov, s, t, grid, tol_neg=NEG_TOL, geometry="arc"):
    """Eigenvalues of the circulant layer covariance ``K_t - K_s`` on the grid.

    Returns the length-``N`` DFT of ``c[j] = K_layer(s, t, d(0, j))`` with
    entries clamped at zero. Negative eigenvalues below ``-tol_neg * max`` are
    reported as a :class:`PositiveDefinitenessError` naming the frequency.

    ``geometry='arc'`` evaluates the covariance at arc distance. Layers with
    ``e^s < 2`` then see a kernel cut at ``d = 1/2``, which stays positive
    definite for the triangle kernel but not for ``bspline3``.
    ``geometry='periodized'`` uses ``K(d) + K(1 - d)`` instead, the exact
    covariance of the 1-periodic field, positive definite for any kernel
    with nonnegative Fourier transform.
    """
    if not 0 <= s <= t:
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    if isinstance(grid, (int, np.integer)):
        grid = SpatialGrid(int(grid))
    if s == t:
        return np.zeros(grid.N)
    d = grid.lag_distance()
    c = np.asarray(cov.layer(s, t, d))
    if geometry == "periodized":
        c = c + np.asarray(cov.layer(s, t, 1.0 - d))
    elif geometry != "arc":
        raise ValueError(f"geometry must be 'arc' or 'periodized', got {geometry!r}")
    lam = np.fft.fft(c).real
    top = lam.max()
    worst = int(np.argmin(lam))
    if lam[worst] < -tol_neg * top:
        raise PositiveDefinitenessError(
            f"layer [{s}, {t}] spectrum has eigenvalue {lam[worst]:.3e} at frequency {worst} "
            f"(max {top:.3e})",
            frequency=worst,
            value=float(lam[worst]),
        )
    return np.maximum(lam, 0.0)


def _synthesize(amp, z):
    """Stationary real fields from half-spectrum amplitudes and white noise.

    ``amp`` has shape ``(..., N//2 + 1)`` holding ``sqrt(N * lambda_k)``;
    ``z`` has shape ``(..., N)``.
    """
    N = z.shape[-1]
    h = N // 2
    coef = np.empty(z.shape[:-1] + (h + 1,), dtype=complex)
    coef[..., 0] = z[..., 0]
    coef[..., h] = z[..., 1]
    coef[..., 1:h] = (z[..., 2::2] + 1j * z[..., 3::2]) * math.sqrt(0.5)
    coef *= amp
    return np.fft.irfft(coef, n=N, axis=-1)


class StarScaleField(BaseEstimator):
    """Sampler for the layered log-correlated field on the discrete circle.

    ``fit`` tabulates the per-layer spectra (the only expensive, data
    independent step); ``sample`` and ``sample_terminal`` then draw
    replicas from the per-replica random streams.

    Parameters
    ----------
    kernel : {'triangle', 'bspline3'}
    horizon : float
        Final field time ``t_L``.
    layer_width : float
        Width of the uniform time layers.
    n_points : int
        Power-of-two number of circle points; must satisfy
        ``1 / n_points <= exp(-horizon)``.
    quadrature_tol : float
    geometry : {'arc', 'periodized'}
        See :func:`layer_spectrum`.
    """

    def __init__(self, kernel="triangle", horizon=6.0, layer_width=0.25, n_points=4096,
                 quadrature_tol=1e-10, geometry="arc"):
        self.kernel = kernel
        self.horizon = horizon
        self.layer_width = layer_width
        self.n_points = n_points
        self.quadrature_tol = quadrature_tol
        self.geometry = geometry

    def fit(self, X=None, y=None):
        tg = TimeGrid.uniform(self.horizon, self.layer_width)
        grid = SpatialGrid(int(self.n_points))
        self.cov_ = ScaleCovariance(get_kernel(self.kernel), self.quadrature_tol)
        self.time_grid_ = tg
        self.grid_ = grid
        self.spectra_ = _layer_spectra(self.cov_, tg, grid, self.geometry)
        N = grid.N
        self.amplitudes_ = np.sqrt(N * self.spectra_[:, : N // 2 + 1])
        self.terminal_amplitude_ = np.sqrt(N * self.spectra_.sum(axis=0)[: N // 2 + 1])
        return self

    def sample(self, seed=0, replica=0):
        """Layered sample for ``(seed, replica)``."""
        check_is_fitted(self, "spectra_")
        rs = ReplicaStream(seed, replica)
        N = self.grid_.N
        z = np.empty((self.time_grid_.n_layers, N))
        for j in range(z.shape[0]):
            z[j] = rs.layer(j).standard_normal(N)
        inc = _synthesize(self.amplitudes_, z)
        return LayeredFieldSample(inc, self.time_grid_, get_kernel(self.kernel).name,
                                  int(seed), int(replica))

    def sample_terminal(self, seed=0, replica=0):
        """``X_{t_L}`` alone, drawn from the summed layer spectrum (one FFT).

        Same law as ``sample(...).terminal()`` but a different realisation.
        """
        check_is_fitted(self, "spectra_")
        z = ReplicaStream(seed, replica).terminal().standard_normal(self.grid_.N)
        return _synthesize(self.terminal_amplitude_, z)


def _layer_spectra(cov, tg, grid, geometry="arc"):
    if grid.N < required_points(tg.horizon):
        raise ResolutionError(
            f"N={grid.N} does not resolve scale e^-{tg.horizon:g}; need N >= "
            f"{required_points(tg.horizon)}",
            required_n=required_points(tg.horizon),
        )
    lv = tg.levels
    return np.stack([layer_spectrum(cov, lv[j], lv[j + 1], grid, geometry=geometry)
                     for j in range(tg.n_layers)])


def sample_field(cov, tg: TimeGrid, grid: SpatialGrid, rng_stream: ReplicaStream,
                 spectra=None, geometry="arc") -> LayeredFieldSample:
    """Draw one layered field sample.

    ``rng_stream`` supplies one generator per layer. Pass precomputed
    ``spectra`` (as returned by repeated :func:`layer_spectrum` calls) to
    avoid recomputing them for every replica.
    """
    if spectra is None:
        spectra = _layer_spectra(cov, tg, grid, geometry)
    N = grid.N
    z = np.stack([rng_stream.layer(j).standard_normal(N) for j in range(tg.n_layers)])
    inc = _synthesize(np.sqrt(N * spectra[:, : N // 2 + 1]), z)
    return LayeredFieldSample(inc, tg, cov.kernel.name,
                              getattr(rng_stream, "seed", 0), getattr(rng_stream, "replica", 0))


@dataclass
class TwoPointPathSample:
    """Cumulative paths ``(X_s(0), X_s(delta))`` on ``s = 0, dt, ..., M dt``.

    ``paths`` has shape ``(2, M + 1)`` or ``(n_paths, 2, M + 1)``.
    """

    delta: float
    dt: float
    paths: np.ndarray

    @property
    def times(self):
        return self.dt * np.arange(self.paths.shape[-1])


def _n_steps(T, dt):
    m = T / dt
    M = int(round(m))
    if M < 1 or abs(m - M) > 1e-9 * max(1.0, m):
        raise ValueError(f"T={T} must be a positive multiple of dt={dt}")
    return M


def two_point_increment_covariances(cov, delta, dt, T):
    """Per-step cross-covariances ``K_{s+dt}(delta) - K_s(delta)`` for ``s = k dt``."""
    M = _n_steps(T, dt)
    K = np.array([cov.K(k * dt, delta) for k in range(M + 1)], dtype=float)
    c = np.diff(K)
    if np.any(np.abs(c) > dt * (1 + 1e-10)):
        k = int(np.argmax(np.abs(c)))
        raise PositiveDefinitenessError(
            f"increment covariance {c[k]:.3e} exceeds variance dt={dt} at step {k}",
            frequency=k, value=float(c[k]),
        )
    return np.clip(c, -dt, dt)


def sample_two_point(cov, delta, dt, T, rng, n_paths=None) -> TwoPointPathSample:
    """Exact discretisation of the two-point process ``(X_s(0), X_s(delta))``.

    Each step draws a centred bivariate Gaussian increment with variances
    ``dt`` and covariance ``K_layer(s, s + dt, delta)``.
    """
    delta = check_scalar(delta, "delta", lo=0.0, lo_open=True)
    dt = check_scalar(dt, "dt", lo=0.0, lo_open=True, hi=0.01)
    c = two_point_increment_covariances(cov, delta, dt, T)
    M = c.size
    shape = (1 if n_paths is None else int(n_paths), M)
    rho = c / dt
    z1 = rng.standard_normal(shape)
    z2 = rng.standard_normal(shape)
    x1 = math.sqrt(dt) * z1
    x2 = rho * x1 + np.sqrt(dt * (1.0 - rho**2)) * z2
    paths = np.zeros((shape[0], 2, M + 1))
    np.cumsum(x1, axis=1, out=paths[:, 0, 1:])
    np.cumsum(x2, axis=1, out=paths[:, 1, 1:])
    return TwoPointPathSample(delta, dt, paths[0] if n_paths is None else paths)


def residual_variance(cov, delta, s, tol=1e-9):
    """Variance of the part of ``X_s(0)`` independent of the path ``X_.(delta)``.

    Equals ``s - int_0^s k(e^u delta)^2 du``: the increments at the two
    points are correlated at rate ``d/du K_u(delta) = k(e^u delta)``.
    """
    s = check_scalar(s, "s", lo=0.0)
    d = abs(float(delta))
    if s == 0.0:
        return 0.0
    if d == 0.0:
        return 0.0
    top = min(s, -math.log(d)) if d < 1 else 0.0
    if top <= 0.0:
        return s
    k = cov.kernel
    pts = [0.0, top] + [math.log(q / d) for q in k.knots if 0.0 < math.log(q / d) < top]
    coupled = integrate_pieces(lambda u: float(k.eval(d * math.exp(u))) ** 2, pts,
                               cov.quadrature_tol)
    out = s - coupled
    if out < -tol:
        raise ArithmeticError(f"negative residual variance {out:.3e}")
    return max(out, 0.0)


# --- binary dump -----------------------------------------------------------
#
# layout (little-endian):
#   magic  b"GMCFLFS1"
#   u32 N, u32 L, u64 seed, u64 replica, 16-byte kernel name (NUL padded)
#   (L + 1) float64 time levels
#   L * N float64 increments, row-major

_MAGIC = b"GMCFLFS1"
_HEADER = struct.Struct("<8sIIQQ16s")


def save_sample(sample: LayeredFieldSample, fh):
    """Write ``sample`` to a binary file object or path."""
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        with open(fh, "wb") as f:
            return save_sample(sample, f)
    L, N = sample.increments.shape
    name = sample.kernel.encode()[:16]
    fh.write(_HEADER.pack(_MAGIC, N, L, sample.seed, sample.replica, name))
    fh.write(np.asarray(sample.time_grid.levels, dtype="<f8").tobytes())
    fh.write(np.ascontiguousarray(sample.increments, dtype="<f8").tobytes())


def load_sample(fh) -> LayeredFieldSample:
    """Inverse of :func:`save_sample`."""
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        with open(fh, "rb") as f:
            return load_sample(f)
    head = fh.read(_HEADER.size)
    magic, N, L, seed, replica, name = _HEADER.unpack(head)
    if magic != _MAGIC:
        raise ValueError("not a layered field sample dump")
    levels = np.frombuffer(fh.read(8 * (L + 1)), dtype="<f8")
    inc = np.frombuffer(fh.read(8 * L * N), dtype="<f8").reshape(L, N).astype(float)
    return LayeredFieldSample(inc, TimeGrid(tuple(levels)), name.rstrip(b"\0").decode(),
                              int(seed), int(replica))


def dumps_sample(sample) -> bytes:
    buf = io.BytesIO()
    save_sample(sample, buf)
    return buf.getvalue()
