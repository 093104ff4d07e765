"""Dense two-phase simplex for the small linear programs built in this package.

Every identified set computed here is the optimum of a bounded LP with at most
a few thousand rows, so a dense tableau is fast enough. Pricing is Dantzig's
rule with a Harris ratio test; after a run of degenerate pivots the solver
switches to Bland's smallest-index rule until the objective moves again, which
rules out cycling. The tableau is rebuilt from the current basis at regular
intervals and before optimality is declared, and dependent equality rows are
removed up front, which keeps the sieve LPs (many nearly parallel rows) stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, InvalidInputError, SolverError

MINIMIZE = "minimize"
MAXIMIZE = "maximize"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-9
VALUE_TOL = 1e-9

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-10
_HARRIS_TOL = 1e-10
_DRIVE_OUT_TOL = 1e-7
_DEGENERATE_STREAK = 20
_REINVERT_EVERY = 50
_RANK_TOL = 1e-10
_CHECK_TOL = 1e-6


def _as_matrix(a, ncols: int, name: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, ncols))
    arr = np.asarray(a, dtype=float)
    if arr.size == 0:
        return np.zeros((0, ncols))
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != ncols:
        raise DimensionMismatchError(
            f"{name} has shape {arr.shape}; expected (rows, {ncols})"
        )
    return arr


def _as_vector(v, length: int, name: str, fill: float) -> np.ndarray:
    if v is None:
        return np.full(length, fill)
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape[0] != length:
        raise DimensionMismatchError(f"{name} has length {arr.shape[0]}; expected {length}")
    return arr


@dataclass(frozen=True)
class LinearProgram:
    """A linear program ``opt objective @ v`` over a polyhedron.

    Inequality rows read ``ineq_lhs @ v <= ineq_rhs``. Variable bounds default
    to ``[0, inf)``; an upper bound of ``+inf`` means the variable is bounded
    only through the rows.
    """

    objective: np.ndarray
    sense: str = MINIMIZE
    ineq_lhs: Optional[np.ndarray] = None
    ineq_rhs: Optional[np.ndarray] = None
    eq_lhs: Optional[np.ndarray] = None
    eq_rhs: Optional[np.ndarray] = None
    var_lower: Optional[np.ndarray] = None
    var_upper: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        n = c.shape[0]
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise InvalidInputError(f"sense must be {MINIMIZE!r} or {MAXIMIZE!r}, got {self.sense!r}")
        A = _as_matrix(self.ineq_lhs, n, "ineq_lhs")
        b = _as_vector(self.ineq_rhs, A.shape[0], "ineq_rhs", 0.0)
        E = _as_matrix(self.eq_lhs, n, "eq_lhs")
        d = _as_vector(self.eq_rhs, E.shape[0], "eq_rhs", 0.0)
        lo = _as_vector(self.var_lower, n, "var_lower", 0.0)
        hi = _as_vector(self.var_upper, n, "var_upper", np.inf)
        for name, arr in (("objective", c), ("ineq_lhs", A), ("ineq_rhs", b),
                          ("eq_lhs", E), ("eq_rhs", d), ("var_lower", lo)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} contains non-finite entries")
        if np.any(np.isnan(hi)) or np.any(hi == -np.inf):
            raise InvalidInputError("var_upper must be finite or +inf")
        if np.any(lo > hi):
            bad = np.flatnonzero(lo > hi)
            raise InvalidInputError(f"var_lower exceeds var_upper at indices {bad.tolist()}")
        for name, arr in (("objective", c), ("ineq_lhs", A), ("ineq_rhs", b),
                          ("eq_lhs", E), ("eq_rhs", d), ("var_lower", lo), ("var_upper", hi)):
            object.__setattr__(self, name, arr)

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]

    def max_violation(self, v: np.ndarray) -> float:
        """Largest constraint violation of point ``v`` (0 when feasible)."""
        v = np.asarray(v, dtype=float)
        parts = [0.0]
        if self.ineq_lhs.shape[0]:
            parts.append(float(np.max(self.ineq_lhs @ v - self.ineq_rhs)))
        if self.eq_lhs.shape[0]:
            parts.append(float(np.max(np.abs(self.eq_lhs @ v - self.eq_rhs))))
        parts.append(float(np.max(self.var_lower - v, initial=0.0)))
        parts.append(float(np.max(v - self.var_upper, initial=0.0)))
        return max(parts)


@dataclass(frozen=True)
class LpSolution:
    status: str
    value: float = float("nan")
    argument: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Tableau:
    """Simplex tableau with the reduced-cost row stored last.

    ``T[-1, :-1]`` are reduced costs of a minimization and ``T[-1, -1]`` is
    minus the current objective value. ``T0`` keeps the original rows so the
    tableau can be rebuilt from the basis when rounding error piles up.
    """

    def __init__(self, T: np.ndarray, basis: np.ndarray, cost: np.ndarray):
        self.T = T
        self.T0 = T[:-1].copy()
        self.basis = basis
        self.cost = cost
        self.pivots = 0

    def pivot(self, i: int, j: int) -> None:
        T = self.T
        T[i] /= T[i, j]
        col = T[:, j].copy()
        col[i] = 0.0
        nz = np.flatnonzero(col)
        if nz.size:
            T[nz] -= col[nz, None] * T[i]
        T[:, j] = 0.0
        T[i, j] = 1.0
        self.basis[i] = j
        self.pivots += 1

    def price(self) -> None:
        self.T[-1] = self.cost - self.cost[self.basis] @ self.T[:-1]

    def reinvert(self) -> None:
        try:
            body = np.linalg.solve(self.T0[:, self.basis], self.T0)
        except np.linalg.LinAlgError:
            return
        if not np.all(np.isfinite(body)):
            return
        body[np.arange(len(self.basis)), self.basis] = 1.0
        self.T[:-1] = body
        self.price()

    def _leaving_row(self, j: int, bland: bool) -> int:
        T = self.T
        col = T[:-1, j]
        rows = np.flatnonzero(col > _PIVOT_TOL)
        if rows.size == 0:
            return -1
        rhs = np.maximum(T[rows, -1], 0.0)
        if bland:
            ratios = rhs / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * (1.0 + best)]
            return int(ties[np.argmin(self.basis[ties])])
        # Harris: allow a tiny bound shift, then take the largest pivot
        bound = np.min((rhs + _HARRIS_TOL) / col[rows])
        ok = rows[rhs / col[rows] <= bound]
        return int(ok[np.argmax(col[ok])])

    def run(self, ncols_active: int, max_iter: int) -> str:
        T = self.T
        streak = 0
        refreshed = False
        for _ in range(max_iter):
            costs = T[-1, :ncols_active]
            bland = streak >= _DEGENERATE_STREAK
            if bland:
                cand = np.flatnonzero(costs < -_COST_TOL)
                j = int(cand[0]) if cand.size else -1
            else:
                j = int(np.argmin(costs))
                if costs[j] >= -_COST_TOL:
                    j = -1
            if j < 0:
                if refreshed:
                    return OPTIMAL
                # confirm optimality on a freshly rebuilt tableau
                self.reinvert()
                refreshed = True
                continue
            i = self._leaving_row(j, bland)
            if i < 0:
                return UNBOUNDED
            step = max(T[i, -1], 0.0) / T[i, j]
            streak = streak + 1 if step <= 1e-12 else 0
            self.pivot(i, j)
            refreshed = False
            if self.pivots % _REINVERT_EVERY == 0:
                self.reinvert()
        raise SolverError(f"simplex did not converge in {max_iter} pivots")


def _standardize(program: LinearProgram, feas_tol: float):
    """Shift to ``x >= 0``, drop fixed variables and empty rows.

    Returns ``None`` when an all-zero row is violated, otherwise the pieces of
    the standard form ``A x <= b, E x = d, x >= 0``.
    """
    lo, hi = program.var_lower, program.var_upper
    free = hi - lo > 0.0
    A, b = program.ineq_lhs, program.ineq_rhs - program.ineq_lhs @ lo
    E, d = program.eq_lhs, program.eq_rhs - program.eq_lhs @ lo
    A, E = A[:, free], E[:, free]
    width = (hi - lo)[free]
    finite = np.flatnonzero(np.isfinite(width))
    if finite.size:
        ub = np.zeros((finite.size, A.shape[1]))
        ub[np.arange(finite.size), finite] = 1.0
        A = np.vstack([A, ub])
        b = np.concatenate([b, width[finite]])

    scale = np.max(np.abs(A), axis=1) if A.shape[0] else np.zeros(0)
    zero = scale == 0.0
    if np.any(b[zero] < -feas_tol):
        return None
    A, b, scale = A[~zero], b[~zero], scale[~zero]
    A, b = A / scale[:, None], b / scale

    escale = np.max(np.abs(E), axis=1) if E.shape[0] else np.zeros(0)
    ezero = escale == 0.0
    if np.any(np.abs(d[ezero]) > feas_tol):
        return None
    E, d, escale = E[~ezero], d[~ezero], escale[~ezero]
    E, d = E / escale[:, None], d / escale
    E, d = _independent_rows(E, d, feas_tol)
    if E is None:
        return None
    return free, A, b, E, d


def _independent_rows(E: np.ndarray, d: np.ndarray, feas_tol: float):
    """Drop equality rows that are combinations of others.

    Returns ``(None, None)`` when a dropped row disagrees with the
    combination of right-hand sides, i.e. the equalities are inconsistent.
    """
    if E.shape[0] <= 1:
        return E, d
    _, R, perm = scipy.linalg.qr(E.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > _RANK_TOL * max(diag[0], 1.0)))
    if rank == E.shape[0]:
        return E, d
    keep, drop = np.sort(perm[:rank]), perm[rank:]
    coef, *_ = np.linalg.lstsq(E[keep].T, E[drop].T, rcond=None)
    gap = np.abs(coef.T @ d[keep] - d[drop])
    if np.any(gap > feas_tol * (1.0 + np.abs(coef).sum(axis=0))):
        return None, None
    return E[keep], d[keep]


@dataclass
class _Feasible:
    """A primal-feasible tableau of a program, ready for any objective."""

    program: LinearProgram
    tab: _Tableau
    free: np.ndarray
    nf: int
    ncols: int
    max_iter: int


def _phase_one(program: LinearProgram, feas_tol: float, max_iter: Optional[int]):
    """Return a feasible basis for ``program`` or ``None`` when it is empty."""
    std = _standardize(program, feas_tol)
    if std is None:
        return None
    free, A, b, E, d = std
    nf = A.shape[1]
    mi, me = A.shape[0], E.shape[0]
    m = mi + me

    neg_ineq = b < 0.0
    neg_eq = d < 0.0
    n_art = int(neg_ineq.sum()) + me
    ncols = nf + mi + n_art
    T = np.zeros((m + 1, ncols + 1))
    basis = np.empty(m, dtype=np.int64)

    sign = np.where(neg_ineq, -1.0, 1.0)
    T[:mi, :nf] = A * sign[:, None]
    T[:mi, nf:nf + mi] = np.diag(sign)
    T[:mi, -1] = b * sign
    esign = np.where(neg_eq, -1.0, 1.0)
    T[mi:m, :nf] = E * esign[:, None]
    T[mi:m, -1] = d * esign

    art_rows = np.concatenate([np.flatnonzero(neg_ineq), np.arange(mi, m)])
    slack_rows = np.flatnonzero(~neg_ineq)
    basis[slack_rows] = nf + slack_rows
    art_cols = nf + mi + np.arange(n_art)
    T[art_rows, art_cols] = 1.0
    basis[art_rows] = art_cols

    if max_iter is None:
        max_iter = 50 * (m + ncols) + 1000

    if not n_art:
        return _Feasible(program, _Tableau(T, basis, np.zeros(ncols + 1)), free, nf, ncols, max_iter)

    phase1 = np.zeros(ncols + 1)
    phase1[art_cols] = 1.0
    tab = _Tableau(T, basis, phase1)
    tab.price()
    tab.run(ncols, max_iter)
    tab.reinvert()
    if -T[-1, -1] > feas_tol:
        return None
    # drive artificials out of the basis; rows that cannot pivot are redundant
    keep = np.ones(m, dtype=bool)
    first_art = nf + mi
    for i in range(m):
        if tab.basis[i] >= first_art:
            cand = np.flatnonzero(np.abs(T[i, :first_art]) > _DRIVE_OUT_TOL)
            if cand.size:
                tab.pivot(i, int(cand[np.argmax(np.abs(T[i, cand]))]))
            else:
                keep[i] = False
    rows = np.concatenate([np.flatnonzero(keep), [m]])
    T = np.hstack([T[rows][:, :first_art], T[rows][:, -1:]])
    out = _Tableau(T, tab.basis[keep], np.zeros(first_art + 1))
    out.T0 = np.hstack([tab.T0[keep][:, :first_art], tab.T0[keep][:, -1:]])
    out.reinvert()
    return _Feasible(program, out, free, nf, first_art, max_iter)


def _optimize(state: _Feasible, objective: np.ndarray, sense: str) -> LpSolution:
    """Phase two from the current basis of ``state``; the basis is left at the optimum."""
    program, tab = state.program, state.tab
    c = objective if sense == MINIMIZE else -objective
    cost = np.zeros(state.ncols + 1)
    cost[:state.nf] = c[state.free]
    tab.cost = cost
    tab.price()
    if tab.run(state.ncols, state.max_iter) == UNBOUNDED:
        return LpSolution(UNBOUNDED)

    xs = np.zeros(state.ncols)
    xs[tab.basis] = np.maximum(tab.T[:-1, -1], 0.0)
    x = program.var_lower.copy()
    x[state.free] += xs[:state.nf]
    x = np.clip(x, program.var_lower, program.var_upper)
    scale = 1.0 + max(np.max(np.abs(program.ineq_rhs), initial=0.0),
                      np.max(np.abs(program.eq_rhs), initial=0.0))
    if program.max_violation(x) > _CHECK_TOL * scale:
        raise SolverError(f"simplex returned a point violating the constraints by {program.max_violation(x):.3g}")
    return LpSolution(OPTIMAL, float(objective @ x), x)


def solve_lp(program: LinearProgram, *, feas_tol: float = FEAS_TOL,
             max_iter: Optional[int] = None) -> LpSolution:
    """Solve ``program`` to global optimality.

    Returns an :class:`LpSolution` whose status is ``optimal``, ``infeasible``
    (phase-one optimum above ``feas_tol``) or ``unbounded``. The reported
    value is recomputed as ``objective @ argument`` after the argument is
    clipped to the variable bounds.
    """
    state = _phase_one(program, feas_tol, max_iter)
    if state is None:
        return LpSolution(INFEASIBLE)
    return _optimize(state, program.objective, program.sense)


def solve_lp_many(program: LinearProgram, objectives, senses, *, feas_tol: float = FEAS_TOL,
                  max_iter: Optional[int] = None) -> list:
    """Solve one polyhedron under several objectives.

    Each solve starts from the optimal basis of the previous one, which is
    much cheaper than starting over when neighbouring objectives are close.
    ``program.objective`` and ``program.sense`` are ignored.
    """
    objectives = [np.asarray(c, dtype=float).reshape(-1) for c in objectives]
    senses = [senses] * len(objectives) if isinstance(senses, str) else list(senses)
    if len(senses) != len(objectives):
        raise DimensionMismatchError("need one sense per objective")
    for c in objectives:
        if c.shape != (program.n_vars,) or not np.all(np.isfinite(c)):
            raise InvalidInputError(f"objectives must be finite vectors of length {program.n_vars}")
    state = _phase_one(program, feas_tol, max_iter)
    if state is None:
        return [LpSolution(INFEASIBLE) for _ in objectives]
    return [_optimize(state, c, sense) for c, sense in zip(objectives, senses)]


def check_feasible(ineq_lhs, ineq_rhs, eq_lhs=None, eq_rhs=None, var_lower=None,
                   var_upper=None, *, tol: float = FEAS_TOL) -> bool:
    """True when the polyhedron described by the arguments is nonempty.

    The number of variables is taken from whichever matrix or bound vector is
    given first.
    """
    n = None
    for arr in (ineq_lhs, eq_lhs):
        if arr is not None and np.asarray(arr).size:
            n = np.atleast_2d(np.asarray(arr)).shape[1]
            break
    if n is None:
        for arr in (var_lower, var_upper):
            if arr is not None:
                n = np.asarray(arr).reshape(-1).shape[0]
                break
    if n is None:
        raise DimensionMismatchError("cannot infer the number of variables")
    program = LinearProgram(np.zeros(n), MINIMIZE, ineq_lhs, ineq_rhs, eq_lhs, eq_rhs,
                            var_lower, var_upper)
    return solve_lp(program, feas_tol=tol).status != INFEASIBLE
