"""Bisection on a monotone boolean predicate over the sensitivity parameter."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import InvalidParameterError

MAX_ITER = 60
DEFAULT_TOL = 1e-6


def bisect_threshold(predicate: Callable[[float], bool], lo: float, hi: float,
                     tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> tuple[float, float]:
    """Shrink ``[lo, hi]`` around the point where ``predicate`` turns true.

    Requires ``predicate(lo)`` false and ``predicate(hi)`` true, with the
    predicate monotone in between. Returns the final bracket; its upper end
    always satisfies the predicate.
    """
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def breakdown_search(bounds_at, value: float, theta_lo: float, tol: float = DEFAULT_TOL,
                     max_iter: int = MAX_ITER):
    """Smallest ``theta >= theta_lo`` whose interval ``bounds_at(theta)`` contains ``value``.

    Relies on intervals growing with ``theta``.
    """
    from .results import BreakdownPoint

    contains = lambda t: bounds_at(t).contains(value, 1e-9)  # noqa: E731
    if contains(theta_lo):
        return BreakdownPoint(theta_lo, theta_lo, (theta_lo, theta_lo))
    if not contains(1.0):
        return BreakdownPoint(None, theta_lo)
    lo, hi = bisect_threshold(contains, theta_lo, 1.0, tol, max_iter)
    return BreakdownPoint(hi, theta_lo, (lo, hi))


def validate_grid(thetas) -> np.ndarray:
    grid = np.asarray(thetas, dtype=float).reshape(-1)
    if grid.size == 0:
        raise InvalidParameterError("theta grid is empty")
    if np.any(~np.isfinite(grid)) or np.any(grid < 0) or np.any(grid > 1):
        raise InvalidParameterError("theta grid values must lie in [0, 1]")
    if np.any(np.diff(grid) <= 0):
        raise InvalidParameterError("theta grid must be strictly increasing")
    return grid
