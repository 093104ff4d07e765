"""Scaled Bernstein basis on [0, 1].

``b_m(y) = (M + 1) * C(M, m) * y**m * (1 - y)**(M - m)`` is the density of a
Beta(m + 1, M - m + 1) variable, so every basis function integrates to one
and simplex-weighted combinations are probability densities.
"""

from __future__ import annotations

import numpy as np
from scipy.special import betainc, comb

from .errors import InvalidInputError


def _check_degree(M) -> int:
    if int(M) != M or M < 0:
        raise InvalidInputError(f"Bernstein degree must be a nonnegative integer, got {M!r}")
    return int(M)


def _check_unit(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)) or np.any(y < 0.0) or np.any(y > 1.0):
        raise InvalidInputError("Bernstein arguments must lie in [0, 1]")
    return y


def bernstein_basis(M: int, y) -> np.ndarray:
    """Basis values; shape ``(M + 1,)`` for scalar ``y``, else ``y.shape + (M + 1,)``."""
    M = _check_degree(M)
    y = _check_unit(y)
    m = np.arange(M + 1)
    yy = y[..., None]
    # 0**0 == 1 in numpy, which gives the right endpoint values
    return (M + 1) * comb(M, m) * yy ** m * (1.0 - yy) ** (M - m)


def bernstein_approx(f_grid, y):
    """``(B_M f)(y)`` from the values ``f(m / M)``, ``m = 0..M``."""
    f = np.asarray(f_grid, dtype=float).reshape(-1)
    if f.size < 1:
        raise InvalidInputError("f_grid is empty")
    M = f.size - 1
    if M == 0:
        return np.full(np.shape(y), f[0]) if np.ndim(y) else float(f[0])
    out = bernstein_basis(M, y) @ f / (M + 1)
    return float(out) if np.ndim(out) == 0 else out


def basis_cdf(M: int, a) -> np.ndarray:
    """``int_0^a b_m(y) dy`` for every ``m``: the Beta(m+1, M-m+1) CDF."""
    M = _check_degree(M)
    a = _check_unit(a)
    m = np.arange(M + 1)
    return betainc(m + 1.0, M - m + 1.0, a[..., None])


def basis_mean(M: int) -> np.ndarray:
    """``int_0^1 y * b_m(y) dy = (m + 1) / (M + 2)``."""
    M = _check_degree(M)
    return (np.arange(M + 1) + 1.0) / (M + 2.0)


def riemann_nodes(L: int) -> np.ndarray:
    """Left-endpoint nodes ``n / L``, ``n = 0..L-1``."""
    if L < 2:
        raise InvalidInputError(f"quadrature size must be at least 2, got {L}")
    return np.arange(L) / L


def constraint_grid(N: int, include_endpoints: bool = False) -> np.ndarray:
    """Interior points ``n / (N + 1)``, ``n = 1..N``; optionally with 0 and 1."""
    if N < 1:
        raise InvalidInputError(f"constraint grid size must be at least 1, got {N}")
    grid = np.arange(1, N + 1) / (N + 1)
    if include_endpoints:
        grid = np.concatenate([[0.0], grid, [1.0]])
    return grid
