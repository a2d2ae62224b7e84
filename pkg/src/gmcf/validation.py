"""Small argument checks shared by the public functions and estimators."""

from __future__ import annotations

import math

import numpy as np

SQRT2 = math.sqrt(2.0)


def check_scalar(x, name, *, lo=None, hi=None, lo_open=False, hi_open=False):
    """Return ``float(x)`` after checking it is finite-or-inf and in range."""
    try:
        x = float(x)
    except (TypeError, ValueError):
        raise TypeError(f"{name} must be a real number, got {type(x).__name__}") from None
    if math.isnan(x):
        raise ValueError(f"{name} must not be NaN")
    if lo is not None and (x < lo or (lo_open and x == lo)):
        op = ">" if lo_open else ">="
        raise ValueError(f"{name} must be {op} {lo}, got {x}")
    if hi is not None and (x > hi or (hi_open and x == hi)):
        op = "<" if hi_open else "<="
        raise ValueError(f"{name} must be {op} {hi}, got {x}")
    return x


def is_power_of_two(n):
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def check_power_of_two(n, name="N"):
    if not is_power_of_two(n):
        raise ValueError(f"{name} must be a power of two, got {n}")
    return int(n)


def required_points(horizon):
    """Smallest power of two ``N`` with ``1/N <= e^{-horizon}``."""
    need = math.exp(horizon)
    n = 1
    while n < need * (1 - 1e-12):
        n *= 2
    return n


def check_masses(masses):
    """Validate a measure (or a stack of measures) given as cell masses."""
    m = np.asarray(masses, dtype=float)
    if m.ndim not in (1, 2):
        raise ValueError(f"masses must be 1-D or 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("masses must be finite")
    if np.any(m < 0):
        raise ValueError("masses must be nonnegative")
    return m


def is_critical(gamma):
    return abs(gamma - SQRT2) <= 1e-12
