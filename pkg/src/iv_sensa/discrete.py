"""Sharp bounds for discrete outcomes under the instrument sensitivity models.

For each treatment arm ``x`` the unknown is the conditional law of ``Y(x)``
given ``Z``. The data restrict it to the box ``H_x`` (plus the simplex when
the outcome is not binary) and the sensitivity model adds the rows
``A_x(theta)``. Every target is a linear functional of that law, so each
bound is one small LP.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .distributions import JointDiscreteDist
from .errors import InvalidInputError, InvalidParameterError
from .lp import FEAS_TOL, MAXIMIZE, MINIMIZE, LinearProgram, check_feasible, solve_lp
from .models import DISCRETE_BINARY, DISCRETE_GENERAL, ModelKind, build_discrete_constraints
from .results import BreakdownPoint, IdentifiedInterval, SensitivityCurve
from .search import DEFAULT_TOL, MAX_ITER, bisect_threshold, breakdown_search, validate_grid
from ._parallel import ordered_map

TARGETS = ("ate", "att", "prob", "pmf", "mean")
BREAKDOWN_TARGETS = ("ate", "att")


@dataclass(frozen=True)
class NoAssumptionBox:
    """Bounds on ``P(Y(x) = y | Z = z)`` implied by the data alone.

    ``lower`` and ``upper`` have shape ``(s_Y, s_Z)``. For a binary outcome
    the row for ``y = 1`` is the familiar pair of intervals.
    """

    arm: int
    lower: np.ndarray
    upper: np.ndarray

    def interval(self, y: int, z: int) -> tuple[float, float]:
        return float(self.lower[y, z]), float(self.upper[y, z])


def noassumption_box(dist: JointDiscreteDist, arm) -> NoAssumptionBox:
    k = dist.arm_index(arm)
    lower = dist.cells[:, k, :].copy()
    upper = np.minimum(lower + (1.0 - dist.pi[k])[None, :], 1.0)
    return NoAssumptionBox(k, lower, upper)


@dataclass(frozen=True)
class ArmPolytope:
    """``Pi_x(theta)`` as LP data. ``form`` fixes the coordinates."""

    form: str
    ineq_lhs: np.ndarray
    ineq_rhs: np.ndarray
    eq_lhs: np.ndarray
    eq_rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def program(self, objective, sense: str) -> LinearProgram:
        return LinearProgram(objective, sense, self.ineq_lhs, self.ineq_rhs,
                             self.eq_lhs, self.eq_rhs, self.lower, self.upper)

    def feasible(self, tol: float = FEAS_TOL) -> bool:
        return check_feasible(self.ineq_lhs, self.ineq_rhs, self.eq_lhs, self.eq_rhs,
                              self.lower, self.upper, tol=tol)


def arm_polytope(dist: JointDiscreteDist, kind: ModelKind, arm, form: str = "auto") -> ArmPolytope:
    """Assemble ``H_x`` intersected with ``A_x(theta)`` for one arm.

    The binary form uses ``(P(Y(x)=1|Z=0), P(Y(x)=1|Z=1))``. The general form
    uses all ``P(Y(x)=y_i|Z=z_j)`` at index ``j * s_Y + i`` together with one
    simplex equality per instrument value.
    """
    box = noassumption_box(dist, arm)
    cons = build_discrete_constraints(kind, dist, arm, form)
    if cons.form == DISCRETE_BINARY:
        lower, upper = box.lower[1], box.upper[1]
        eq_lhs, eq_rhs = np.zeros((0, 2)), np.zeros(0)
    else:
        lower, upper = box.lower.T.reshape(-1), box.upper.T.reshape(-1)
        eq_lhs = np.kron(np.eye(dist.s_z), np.ones((1, dist.s_y)))
        eq_rhs = np.ones(dist.s_z)
    return ArmPolytope(cons.form, cons.lhs, cons.rhs, eq_lhs, eq_rhs, lower, upper)


def _objective(dist: JointDiscreteDist, form: str, weights_y: np.ndarray) -> tuple[np.ndarray, float]:
    """Coefficients and constant for ``sum_y weights_y[y] * P(Y(x) = y)``."""
    if form == DISCRETE_BINARY:
        return (weights_y[1] - weights_y[0]) * dist.pz, float(weights_y[0])
    return np.kron(dist.pz, weights_y), 0.0


def _linear_bounds(dist: JointDiscreteDist, kind: ModelKind, arm, weights_y, form: str) -> IdentifiedInterval:
    poly = arm_polytope(dist, kind, arm, form)
    if not poly.feasible():
        return IdentifiedInterval.empty()
    c, const = _objective(dist, poly.form, np.asarray(weights_y, dtype=float))
    lo = solve_lp(poly.program(c, MINIMIZE))
    hi = solve_lp(poly.program(c, MAXIMIZE))
    if not (lo.optimal and hi.optimal):
        return IdentifiedInterval.empty()
    return IdentifiedInterval(lo.value + const, hi.value + const)


def _require_binary_outcome(dist: JointDiscreteDist, what: str) -> None:
    if dist.s_y != 2:
        raise InvalidInputError(f"{what} needs a binary outcome; outcome support has {dist.s_y} values")


def potential_prob_bounds(dist: JointDiscreteDist, kind: ModelKind, arm, form: str = "auto") -> IdentifiedInterval:
    """Bounds on ``P(Y(x) = 1)`` for a binary outcome."""
    _require_binary_outcome(dist, "potential_prob_bounds")
    return _linear_bounds(dist, kind, arm, [0.0, 1.0], form)


def _outcome_index(dist: JointDiscreteDist, y) -> int:
    try:
        value = float(y)
    except (TypeError, ValueError):
        raise InvalidInputError(f"outcome value {y!r} is not numeric") from None
    for i, v in enumerate(dist.y_support):
        if abs(v - value) <= 1e-12:
            return i
    raise InvalidInputError(f"outcome value {y!r} not in support {dist.y_support}")


def pmf_bounds(dist: JointDiscreteDist, kind: ModelKind, arm, y) -> IdentifiedInterval:
    """Bounds on ``P(Y(x) = y)`` over the general polytope."""
    w = np.zeros(dist.s_y)
    w[_outcome_index(dist, y)] = 1.0
    return _linear_bounds(dist, kind, arm, w, DISCRETE_GENERAL)


def mean_bounds(dist: JointDiscreteDist, kind: ModelKind, arm, form: str = "auto") -> IdentifiedInterval:
    """Bounds on ``E[Y(x)]``."""
    return _linear_bounds(dist, kind, arm, np.asarray(dist.y_support), form)


def _treatment_arms(dist: JointDiscreteDist, treated, control) -> tuple[int, int]:
    if treated is None and control is None and dist.s_x != 2:
        raise InvalidInputError(
            f"treatment has {dist.s_x} levels; name the treated and control arms explicitly"
        )
    t = dist.arm_index(1 if treated is None else treated)
    c = dist.arm_index(0 if control is None else control)
    if t == c:
        raise InvalidInputError("treated and control arms must differ")
    return t, c


def ate_bounds(dist: JointDiscreteDist, kind: ModelKind, treated=None, control=None,
               form: str = "auto") -> IdentifiedInterval:
    """``[lower E[Y(1)] - upper E[Y(0)], upper E[Y(1)] - lower E[Y(0)]]``."""
    t, c = _treatment_arms(dist, treated, control)
    m1 = mean_bounds(dist, kind, t, form)
    m0 = mean_bounds(dist, kind, c, form)
    if not (m1.feasible and m0.feasible):
        return IdentifiedInterval.empty()
    return IdentifiedInterval(m1.lower - m0.upper, m1.upper - m0.lower)


def att_bounds(dist: JointDiscreteDist, kind: ModelKind, treated=None, control=None,
               form: str = "auto") -> IdentifiedInterval:
    """Bounds on ``E[Y(1) - Y(0) | X = 1]``.

    ``E[Y(0) | X = 1]`` is recovered from ``E[Y(0)]`` through the law of total
    probability over ``X``, so only the control arm needs an LP. The treated
    arm must still be feasible for the model to be consistent with the data.
    """
    if dist.s_x != 2:
        raise InvalidInputError("ATT is defined for a binary treatment")
    t, c = _treatment_arms(dist, treated, control)
    m0 = mean_bounds(dist, kind, c, form)
    if not m0.feasible or not arm_polytope(dist, kind, t, form).feasible():
        return IdentifiedInterval.empty()
    p_t, p_c = dist.p_x(t), dist.p_x(c)
    ey = dist.cond_mean_y_given_x
    cf = lambda m: (m - ey[c] * p_c) / p_t  # noqa: E731
    return IdentifiedInterval(ey[t] - cf(m0.upper), ey[t] - cf(m0.lower))


def target_bounds(dist: JointDiscreteDist, kind: ModelKind, target: str, *, arm=None, y=None) -> IdentifiedInterval:
    """Dispatch on a target name from ``TARGETS``."""
    if target == "ate":
        return ate_bounds(dist, kind)
    if target == "att":
        _require_binary_outcome(dist, "att")
        return att_bounds(dist, kind)
    if target in ("prob", "pmf", "mean"):
        if arm is None:
            raise InvalidParameterError(f"target {target!r} needs an arm")
        if target == "prob":
            return potential_prob_bounds(dist, kind, arm)
        if target == "mean":
            return mean_bounds(dist, kind, arm)
        if y is None:
            raise InvalidParameterError("target 'pmf' needs an outcome value")
        return pmf_bounds(dist, kind, arm, y)
    raise InvalidParameterError(f"unknown target {target!r}; choose from {TARGETS}")


def _arm_falsification(dist, kind: ModelKind, arm, tol: float, max_iter: int) -> float:
    feasible = lambda t: arm_polytope(dist, kind.at(t), arm).feasible()  # noqa: E731
    if feasible(0.0):
        return 0.0
    _, hi = bisect_threshold(feasible, 0.0, 1.0, tol, max_iter)
    return hi


def falsification_point(dist: JointDiscreteDist, kind, tol: float = DEFAULT_TOL,
                        max_iter: int = MAX_ITER) -> float:
    """Smallest ``theta`` at which every arm's polytope is nonempty, within ``tol``.

    The returned value always lies on the feasible side of the bracket.
    """
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    kind = kind if isinstance(kind, ModelKind) else ModelKind(kind, 1.0)
    return max(_arm_falsification(dist, kind, k, tol, max_iter) for k in range(dist.s_x))


def breakdown_point(dist: JointDiscreteDist, kind, target: str = "ate", value: float = 0.0,
                    tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> BreakdownPoint:
    """Smallest ``theta`` whose identified set for ``target`` contains ``value``."""
    if target not in BREAKDOWN_TARGETS:
        raise InvalidParameterError(f"breakdown target must be one of {BREAKDOWN_TARGETS}, got {target!r}")
    kind = kind if isinstance(kind, ModelKind) else ModelKind(kind, 1.0)
    theta_lo = falsification_point(dist, kind, tol, max_iter)
    return breakdown_search(lambda t: target_bounds(dist, kind.at(t), target), float(value),
                      theta_lo, tol, max_iter)


def sensitivity_curve(dist: JointDiscreteDist, kind, thetas: Sequence[float], target: str = "ate",
                      *, arm=None, y=None) -> SensitivityCurve:
    """Bounds on ``target`` at each ``theta``; rows below the falsification point are infeasible."""
    grid = validate_grid(thetas)
    kind = kind if isinstance(kind, ModelKind) else ModelKind(kind, 1.0)
    intervals = ordered_map(lambda t: target_bounds(dist, kind.at(t), target, arm=arm, y=y), grid)
    return SensitivityCurve.from_intervals(grid, intervals)


__all__ = [
    "TARGETS", "NoAssumptionBox", "ArmPolytope", "noassumption_box", "arm_polytope",
    "potential_prob_bounds", "pmf_bounds", "mean_bounds", "ate_bounds", "att_bounds",
    "target_bounds", "falsification_point", "breakdown_point", "sensitivity_curve",
    "validate_grid",
]
