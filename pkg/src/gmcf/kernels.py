"""Seed kernels and the scale covariance ``K_t(d) = int_1^{e^t} k(u d) / u du``.

Two built-in seed kernels are provided, both compactly supported on
``[-1, 1]``, even, with ``k(0) = 1`` and positive definite on the line (each
is the normalised autocorrelation of a compactly supported function):

``triangle``
    ``k(x) = (1 - |x|)_+``. Only piecewise C^1 but fast and the default.
``bspline3``
    The cubic B-spline rescaled to ``[-1, 1]`` and normalised to one at the
    origin. C^2.

Both are piecewise polynomials, for which the log-integral defining the
layer covariance has a closed form. Kernels without one fall back to
adaptive Simpson quadrature in the log-scale variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .quadrature import integrate_pieces

__all__ = [
    "SeedKernel",
    "PiecewisePolynomialKernel",
    "TRIANGLE",
    "BSPLINE3",
    "get_kernel",
    "ScaleCovariance",
    "EstimateReport",
    "k_eval",
    "K_eval",
    "K_layer",
    "K_prime",
    "verify_estimates",
]


class SeedKernel:
    """Extension point for seed kernels.

    Subclasses implement :meth:`eval` and :meth:`deriv` (vectorised, even
    and odd respectively) and set ``deriv_sup``. ``knots`` lists the points
    of ``(0, 1)`` where the kernel is not smooth; quadrature splits there.
    """

    name: str = "abstract"
    deriv_sup: float = float("nan")
    knots: tuple = ()
    smooth_at_origin: bool = True

    def eval(self, x):
        raise NotImplementedError

    def deriv(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.eval(x)

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r})"


class PiecewisePolynomialKernel(SeedKernel):
    """Even kernel given on ``[0, 1]`` by polynomial pieces.

    Parameters
    ----------
    name : str
    pieces : sequence of (lo, hi, coeffs)
        Consecutive intervals covering ``[0, 1]``; ``coeffs`` are in
        ascending powers of ``v``. The first piece must satisfy
        ``coeffs[0] == 1`` so that ``k(0) = 1``.
    deriv_sup : float
        Exact ``sup |k'|``.
    smooth_at_origin : bool
        Whether ``k'(0) = 0`` (otherwise ``K'`` at zero gap is undefined).
    """

    def __init__(self, name, pieces, deriv_sup, smooth_at_origin=True):
        self.name = name
        self.pieces = [(float(lo), float(hi), np.asarray(c, dtype=float)) for lo, hi, c in pieces]
        if self.pieces[0][0] != 0.0 or self.pieces[-1][1] != 1.0:
            raise ValueError("pieces must cover [0, 1]")
        if self.pieces[0][2][0] != 1.0:
            raise ValueError("kernel must satisfy k(0) = 1")
        self.deriv_sup = float(deriv_sup)
        self.smooth_at_origin = smooth_at_origin
        self.knots = tuple(hi for _, hi, _ in self.pieces[:-1])
        self._dcoeffs = [np.polynomial.polynomial.polyder(c) for _, _, c in self.pieces]
        # H(v) = int_0^v (k(w) - 1) / w dw, tabulated at piece starts.
        self._h_start = [0.0]
        for lo, hi, c in self.pieces[:-1]:
            self._h_start.append(self._h_start[-1] + self._anti(c, hi) - self._anti(c, lo))

    @staticmethod
    def _anti(c, v):
        # antiderivative of (p(w) - 1) / w; the log term vanishes on the first piece
        out = 0.0
        if c[0] != 1.0:
            out += (c[0] - 1.0) * math.log(v) if v > 0 else 0.0
        for p in range(1, len(c)):
            out += c[p] * v**p / p
        return out

    def _piece_index(self, v):
        edges = np.array([lo for lo, _, _ in self.pieces[1:]])
        return np.searchsorted(edges, v, side="right")

    def eval(self, x):
        v = np.abs(np.asarray(x, dtype=float))
        out = np.zeros_like(v)
        idx = self._piece_index(v)
        inside = v < 1.0
        for i, (_, _, c) in enumerate(self.pieces):
            sel = inside & (idx == i)
            if np.any(sel):
                out[sel] = np.polynomial.polynomial.polyval(v[sel], c)
        return out if out.ndim else float(out)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        v = np.abs(x)
        out = np.zeros_like(v)
        idx = self._piece_index(v)
        inside = (v < 1.0) & (v > 0.0)
        for i, dc in enumerate(self._dcoeffs):
            sel = inside & (idx == i)
            if np.any(sel):
                out[sel] = np.polynomial.polynomial.polyval(v[sel], dc)
        out = np.sign(x) * out
        return out if out.ndim else float(out)

    def _h(self, v):
        """``H(v) = int_0^v (k(w) - 1)/w dw`` for ``0 <= v <= 1`` (vectorised)."""
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        idx = self._piece_index(v)
        for i, (lo, _, c) in enumerate(self.pieces):
            sel = idx == i
            if not np.any(sel):
                continue
            vv = v[sel]
            val = np.full_like(vv, self._h_start[i] - self._anti(c, lo))
            if c[0] != 1.0:
                with np.errstate(divide="ignore"):
                    val += (c[0] - 1.0) * np.log(vv)
            for p in range(1, len(c)):
                val += c[p] * vv**p / p
            out[sel] = val
        return out

    def layer(self, s, t, delta):
        """``int_{d e^s}^{d e^t} k(v)/v dv`` for gaps ``d >= 0`` (vectorised in ``d``).

        The singular ``log`` part is evaluated as ``min(t, -log d) - min(s, -log d)``
        which is exact at ``d = 0`` and free of cancellation for small gaps.
        """
        d = np.abs(np.asarray(delta, dtype=float))
        with np.errstate(divide="ignore"):
            neg_log = -np.log(d)
        log_part = np.minimum(t, neg_log) - np.minimum(s, neg_log)
        log_part = np.maximum(log_part, 0.0)
        hi = np.minimum(np.exp(np.minimum(t - neg_log, 0.0)), 1.0)
        lo = np.minimum(np.exp(np.minimum(s - neg_log, 0.0)), 1.0)
        out = log_part + self._h(hi) - self._h(lo)
        return out if out.ndim else float(out)


TRIANGLE = PiecewisePolynomialKernel(
    "triangle", [(0.0, 1.0, [1.0, -1.0])], deriv_sup=1.0, smooth_at_origin=False
)

# k(v) = B(2v) / B(0) for the cardinal cubic B-spline B on [-2, 2].
BSPLINE3 = PiecewisePolynomialKernel(
    "bspline3",
    [
        (0.0, 0.5, [1.0, 0.0, -6.0, 6.0]),
        (0.5, 1.0, [2.0, -6.0, 6.0, -2.0]),
    ],
    deriv_sup=2.0,
)

_KERNELS = {"triangle": TRIANGLE, "bspline3": BSPLINE3}


def get_kernel(name):
    """Look up a built-in kernel by name (``'triangle'`` or ``'bspline3'``)."""
    if isinstance(name, SeedKernel):
        return name
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; expected one of {sorted(_KERNELS)}") from None


@dataclass(frozen=True)
class ScaleCovariance:
    """Scale covariance built on a seed kernel.

    ``method='auto'`` uses the kernel's closed form when it has one and
    adaptive Simpson quadrature otherwise; ``'quadrature'`` forces the latter.
    """

    kernel: SeedKernel = field(default_factory=lambda: TRIANGLE)
    quadrature_tol: float = 1e-10
    method: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "kernel", get_kernel(self.kernel))
        if self.method not in ("auto", "quadrature"):
            raise ValueError("method must be 'auto' or 'quadrature'")

    @property
    def closed_form(self):
        return self.method == "auto" and hasattr(self.kernel, "layer")

    def K(self, t, delta):
        return self.layer(0.0, t, delta)

    def layer(self, s, t, delta):
        """``K_t(d) - K_s(d)`` for ``0 <= s <= t``, vectorised over ``d``."""
        if s < 0 or t < s:
            raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
        if self.closed_form:
            return self.kernel.layer(s, t, delta)
        d = np.abs(np.asarray(delta, dtype=float))
        out = np.array([self._layer_quad(s, t, float(x)) for x in d.ravel()]).reshape(d.shape)
        return out if out.ndim else float(out)

    def _layer_quad(self, s, t, d):
        # int_{e^s}^{e^t} k(u d)/u du = int_s^t k(d e^x) dx
        if d == 0.0:
            return float(t - s)
        top = min(t, -math.log(d))
        if top <= s:
            return 0.0
        k = self.kernel
        pts = [s, top] + [math.log(q / d) for q in k.knots if s < math.log(q / d) < top]
        return integrate_pieces(lambda x: float(k.eval(d * math.exp(x))), pts, self.quadrature_tol)

    def time_derivative(self, u, delta):
        """``d/du K_u(d) = k(e^u d)``: the correlation rate of the two increments."""
        return self.kernel.eval(np.exp(u) * np.abs(np.asarray(delta, dtype=float)))

    def K_prime(self, t, delta):
        """Gap derivative ``d/dd K_t(d) = int_1^{e^t} k'(u d) du``.

        For ``d != 0`` this integral equals ``(k(d e^t) - k(d)) / d`` exactly.
        """
        d = np.asarray(delta, dtype=float)
        if np.any(d == 0.0):
            if not self.kernel.smooth_at_origin:
                raise ValueError(f"{self.kernel.name} kernel: K_t is not differentiable at zero gap")
        a = np.abs(d)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = (self.kernel.eval(a * math.exp(t)) - self.kernel.eval(a)) / a
        val = np.where(a == 0.0, 0.0, np.sign(d) * val)
        return val if val.ndim else float(val)

    def K_prime_quad(self, t, delta):
        """Quadrature route for :meth:`K_prime` (independent cross-check)."""
        d = float(delta)
        k = self.kernel
        top = math.exp(t)
        if d != 0.0:
            top = min(top, 1.0 / abs(d))
        if top <= 1.0:
            return 0.0
        pts = [1.0, top] + [q / abs(d) for q in k.knots if d != 0 and 1.0 < q / abs(d) < top]
        return integrate_pieces(lambda u: float(k.deriv(u * d)), pts, self.quadrature_tol)


def _as_cov(cov):
    if isinstance(cov, ScaleCovariance):
        return cov
    return ScaleCovariance(get_kernel(cov))


def k_eval(kernel, x):
    """Seed kernel value ``k(x)``; zero outside ``[-1, 1]``."""
    return get_kernel(kernel).eval(x)


def K_eval(cov, t, delta):
    """Scale covariance ``K_t(delta)``; exactly ``t`` at ``delta = 0``."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return _as_cov(cov).K(t, delta)


def K_layer(cov, s, t, delta):
    """Layer covariance ``K_t(delta) - K_s(delta)`` (nonnegative)."""
    if s > t:
        raise ValueError(f"layer needs s <= t, got s={s} > t={t}")
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    return _as_cov(cov).layer(s, t, delta)


def K_prime(cov, t, delta):
    """Gap derivative of ``K_t``; ``|K'| <= e^t sup|k'|``."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return _as_cov(cov).K_prime(t, delta)


@dataclass
class EstimateReport:
    """Outcome of :func:`verify_estimates`.

    ``rows`` holds one dict per ``r`` with the two maximal deviations.
    """

    kernel: str
    bound: float
    rows: list
    passed: bool

    def max_deviation(self):
        return max(max(r["dev_K"], r["dev_layer"]) for r in self.rows)


def _layer_prediction(r, s, d):
    with np.errstate(divide="ignore"):
        neg_log = -np.log(d)
    return np.maximum(0.0, np.minimum(s, neg_log - r))


def verify_estimates(
    cov,
    r_list: Sequence[float],
    s_list: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0),
    n_grid: int = 2001,
) -> EstimateReport:
    """Sweep the near-diagonal estimates of ``K_r`` and of the layer ``K_{r+s} - K_r``.

    For each ``r`` the gap grid covers ``[0, e^{-r+1}]`` (uniform points plus
    a logarithmic cluster down to ``e^{-r-max(s)-3}`` and the points
    ``e^{-r}``, ``e^{-r-s}``). Deviations are compared with
    ``e * sup|k'|``, the constant obtained by bounding ``|k(u d) - 1|`` by
    ``sup|k'| u d`` with ``d <= e^{-r+1}``.

    The layer is predicted by ``(s ∧ (log 1/d - r))_+``, which is ``0`` once
    ``d >= e^{-r}`` because ``k`` vanishes beyond one.
    """
    cov = _as_cov(cov)
    bound = math.e * cov.kernel.deriv_sup
    rows = []
    for r in r_list:
        if r < 0:
            raise ValueError(f"r must be >= 0, got {r}")
        top = math.exp(-r + 1.0)
        grid = np.concatenate(
            [
                np.linspace(0.0, top, n_grid),
                np.geomspace(math.exp(-r - max(s_list) - 3.0), top, n_grid // 2),
                [math.exp(-r)] + [math.exp(-r - s) for s in s_list],
            ]
        )
        grid = np.unique(grid[grid <= top])
        dev_K = float(np.max(np.abs(np.asarray(cov.K(r, grid)) - r)))
        dev_layer = 0.0
        for s in s_list:
            val = np.asarray(cov.layer(r, r + s, grid))
            dev_layer = max(dev_layer, float(np.max(np.abs(val - _layer_prediction(r, s, grid)))))
        rows.append({"r": float(r), "dev_K": dev_K, "dev_layer": dev_layer,
                     "passed": dev_K <= bound and dev_layer <= bound})
    return EstimateReport(cov.kernel.name, bound, rows, all(row["passed"] for row in rows))
