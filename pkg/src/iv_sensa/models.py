"""Linear constraint sets for the three instrument sensitivity models.

A single parameter ``theta`` in [0, 1] indexes each model: it is used
directly as the MSM parameter ``lambda = 1 - 1/Lambda``, as the
c-dependence bound ``c``, and as the KS bound ``K``. At ``theta = 0`` every
model forces the conditional outcome distribution of an arm to be the same
for all instrument values; at ``theta = 1`` it imposes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import FormMismatchError, InvalidParameterError

MSM = "msm"
CDEP = "cdep"
KS = "ks"
MODEL_TAGS = (MSM, CDEP, KS)

DISCRETE_BINARY = "discrete_binary"
DISCRETE_GENERAL = "discrete_general"
DENSITY = "density"


@dataclass(frozen=True)
class ModelKind:
    tag: str
    theta: float

    def __post_init__(self):
        if self.tag not in MODEL_TAGS:
            raise InvalidParameterError(f"unknown sensitivity model {self.tag!r}; choose from {MODEL_TAGS}")
        theta = float(self.theta)
        if not 0.0 <= theta <= 1.0:
            raise InvalidParameterError(f"sensitivity parameter must lie in [0, 1], got {self.theta}")
        object.__setattr__(self, "theta", theta)

    def at(self, theta: float) -> "ModelKind":
        return ModelKind(self.tag, theta)


def as_tag(model) -> str:
    tag = model.tag if isinstance(model, ModelKind) else str(model)
    if tag not in MODEL_TAGS:
        raise InvalidParameterError(f"unknown sensitivity model {tag!r}; choose from {MODEL_TAGS}")
    return tag


@dataclass(frozen=True)
class LinearConstraintSet:
    """Rows ``lhs @ v <= rhs`` in the coordinates named by ``form``."""

    lhs: np.ndarray
    rhs: np.ndarray
    form: str

    def __post_init__(self):
        lhs = np.atleast_2d(np.asarray(self.lhs, dtype=float))
        rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        if lhs.shape[0] != rhs.shape[0]:
            raise InvalidParameterError(f"{lhs.shape[0]} rows but {rhs.shape[0]} right-hand sides")
        if not (np.all(np.isfinite(lhs)) and np.all(np.isfinite(rhs))):
            raise InvalidParameterError("constraint rows must be finite")
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "rhs", rhs)

    @property
    def n_rows(self) -> int:
        return self.lhs.shape[0]

    def satisfied(self, v, tol: float = 1e-12) -> bool:
        return bool(np.all(self.lhs @ np.asarray(v, dtype=float) <= self.rhs + tol))


def _pz_vector(pz) -> np.ndarray:
    p = np.atleast_1d(np.asarray(pz, dtype=float))
    if p.size == 1:
        p = np.array([1.0 - p[0], p[0]])
    if np.any(p <= 0) or np.any(p >= 1) or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidParameterError(f"instrument marginals must lie in (0,1) and sum to one, got {p.tolist()}")
    return p


def kz(c: float, pz) -> tuple[float, float]:
    """Slopes ``(k_0(c), k_1(c))`` of the binary c-dependence constraints.

    ``pz`` is either ``P(Z = 1)`` or the pair ``(P(Z = 0), P(Z = 1))``.
    """
    if not 0.0 <= c <= 1.0:
        raise InvalidParameterError(f"c must lie in [0, 1], got {c}")
    p = _pz_vector(pz)
    if p.size != 2:
        raise FormMismatchError("k_z(c) is defined for a binary instrument")
    k = [p[z] * max(p[1 - z] - c, 0.0) / (p[1 - z] * min(p[z] + c, 1.0)) for z in (0, 1)]
    return float(k[0]), float(k[1])


def _binary_rows(kind: ModelKind, pz) -> tuple[np.ndarray, np.ndarray]:
    t = kind.theta
    if kind.tag == MSM:
        A = [[1 - t, -1], [-1, 1 - t], [t - 1, 1], [1, t - 1]]
        a = [0.0, 0.0, t, t]
    elif kind.tag == CDEP:
        k0, k1 = kz(t, pz)
        A = [[k0, -1], [-1, k1], [-k0, 1], [1, -k1]]
        a = [0.0, 0.0, 1 - k0, 1 - k1]
    else:
        A = [[1, -1], [-1, 1]]
        a = [t, t]
    return np.array(A, dtype=float), np.array(a, dtype=float)


def _general_rows(kind: ModelKind, pz: np.ndarray, s_y: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows over ``p(y_i | z_j)`` stored at index ``j * s_y + i``."""
    s_z = len(pz)
    t = kind.theta
    idx = lambda i, j: j * s_y + i  # noqa: E731
    rows, rhs = [], []
    if kind.tag == MSM:
        for i in range(s_y):
            for j, jp in permutations(range(s_z), 2):
                r = np.zeros(s_y * s_z)
                r[idx(i, jp)] += 1 - t
                r[idx(i, j)] -= 1
                rows.append(r)
                rhs.append(0.0)
    elif kind.tag == CDEP:
        # |P(Z=z|Y(x)=y) - P(Z=z)| <= c after multiplying through by P(Y(x)=y)
        for i in range(s_y):
            marg = np.zeros(s_y * s_z)
            for jp in range(s_z):
                marg[idx(i, jp)] = pz[jp]
            for j in range(s_z):
                own = np.zeros(s_y * s_z)
                own[idx(i, j)] = pz[j]
                rows.append(own - (pz[j] + t) * marg)
                rows.append(-own + (pz[j] - t) * marg)
                rhs += [0.0, 0.0]
    else:
        for i in range(s_y - 1):
            for j, jp in permutations(range(s_z), 2):
                r = np.zeros(s_y * s_z)
                r[[idx(q, j) for q in range(i + 1)]] += 1
                r[[idx(q, jp) for q in range(i + 1)]] -= 1
                rows.append(r)
                rhs.append(t)
    return np.array(rows, dtype=float).reshape(-1, s_y * s_z), np.array(rhs, dtype=float)


def build_discrete_constraints(kind: ModelKind, dist, arm=None, form: str = "auto") -> LinearConstraintSet:
    """Constraint rows of ``kind`` for one treatment arm of a discrete law.

    The binary form acts on ``(P(Y(x)=1|Z=0), P(Y(x)=1|Z=1))``. The general
    form acts on the full vector of ``P(Y(x)=y|Z=z)`` and leaves the simplex
    equalities to the caller. Rows do not depend on ``arm``; the argument
    keeps the call shape uniform with per-arm polytopes.
    """
    if form == "auto":
        form = DISCRETE_BINARY if dist.is_binary else DISCRETE_GENERAL
    if form == DISCRETE_BINARY:
        if not dist.is_binary:
            raise FormMismatchError(
                f"binary form needs binary Y, X and Z; supports have sizes {(dist.s_y, dist.s_x, dist.s_z)}"
            )
        A, a = _binary_rows(kind, dist.pz)
    elif form == DISCRETE_GENERAL:
        A, a = _general_rows(kind, dist.pz, dist.s_y)
    else:
        raise FormMismatchError(f"unknown discrete form {form!r}")
    return LinearConstraintSet(A, a, form)


def build_density_constraints(kind: ModelKind, pz, arm=None) -> LinearConstraintSet:
    """Componentwise system ``A f(y) <= a`` over the vector ``(f(y|z_j))_j``.

    With a binary instrument each model is a 2x2 system. The KS rows
    have right-hand side ``K / (1 - K)`` and disappear at ``K = 1``.
    """
    p = _pz_vector(pz)
    s_z = len(p)
    t = kind.theta
    if kind.tag == KS and t >= 1.0:
        return LinearConstraintSet(np.zeros((0, s_z)), np.zeros(0), DENSITY)
    if s_z == 2:
        if kind.tag == MSM:
            A, a = [[-1, 1 - t], [1 - t, -1]], [0.0, 0.0]
        elif kind.tag == CDEP:
            k0, k1 = kz(t, p)
            A, a = [[-1, k1], [k0, -1]], [0.0, 0.0]
        else:
            bound = t / (1 - t)
            A, a = [[1, -1], [-1, 1]], [bound, bound]
        return LinearConstraintSet(np.array(A, dtype=float), np.array(a), DENSITY)
    rows, rhs = [], []
    if kind.tag == MSM:
        for j, jp in permutations(range(s_z), 2):
            r = np.zeros(s_z)
            r[jp] += 1 - t
            r[j] -= 1
            rows.append(r)
            rhs.append(0.0)
    elif kind.tag == CDEP:
        for j in range(s_z):
            own = np.zeros(s_z)
            own[j] = p[j]
            rows += [own - (p[j] + t) * p, -own + (p[j] - t) * p]
            rhs += [0.0, 0.0]
    else:
        bound = t / (1 - t)
        for j, jp in permutations(range(s_z), 2):
            r = np.zeros(s_z)
            r[j], r[jp] = 1.0, -1.0
            rows.append(r)
            rhs.append(bound)
    return LinearConstraintSet(np.array(rows), np.array(rhs), DENSITY)


def cdep_density_minmax_rows(c: float, pz) -> LinearConstraintSet:
    """Binary c-dependence for densities written with ``min``/``max`` coefficients.

    Same feasible set as the ``k_z`` matrix form; each row is a positive
    multiple of the corresponding ``k_z`` row.
    """
    if not 0.0 <= c <= 1.0:
        raise InvalidParameterError(f"c must lie in [0, 1], got {c}")
    p = _pz_vector(pz)
    p1 = p[1]
    hi, lo = min(p1 + c, 1.0), max(p1 - c, 0.0)
    A = [[-hi * (1 - p1), (1 - hi) * p1], [lo * (1 - p1), (lo - 1) * p1]]
    return LinearConstraintSet(np.array(A), np.zeros(2), DENSITY)
