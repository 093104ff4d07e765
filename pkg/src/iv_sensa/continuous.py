"""Bernstein-sieve bounds for continuous outcomes on [0, 1].

Each conditional density ``f(y | Z = z)`` of a potential outcome is replaced
by a simplex-weighted mixture of the scaled Bernstein basis, so one row of a
weight matrix ``W`` describes one density. For arm ``x`` the data pin down
the part of ``f_{Y(x)|Z}`` carried by units with ``X = x``:

    W_x = D_x Xi_x + D_{1-x} W_{x,1-x},      D_x = diag(pi(x | z)),

and the sensitivity model is imposed pointwise on a grid of ``N`` outcome
values. Linear functionals of the two potential-outcome laws then become
finite LPs. Because nothing links the two arms, every bound splits into one
LP per arm over ``W_{x,1-x}`` alone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bernstein import basis_cdf, basis_mean, bernstein_basis, constraint_grid, riemann_nodes
from .distributions import CondDensityTable
from .errors import BuildError, InvalidInputError, InvalidParameterError
from .lp import FEAS_TOL, MAXIMIZE, MINIMIZE, LinearProgram, check_feasible, solve_lp_many
from .models import ModelKind, build_density_constraints
from .results import BreakdownPoint, IdentifiedInterval, SensitivityCurve
from .search import DEFAULT_TOL, MAX_ITER, bisect_threshold, breakdown_search, validate_grid
from ._parallel import ordered_map

log = logging.getLogger(__name__)

RIEMANN = "riemann"
EXACT = "exact"
MONOTONE_WARN = 0.01
REFUTE_TOL = 1e-6
DEFAULT_A_POINTS = 256

LEVEL = "level"
DIFFERENCE = "difference"
PROBABILITY = "probability"


@dataclass(frozen=True)
class SieveConfig:
    """Sieve sizes: Bernstein degree ``M``, constraint grid ``N``, quadrature ``L``."""

    M: int = 30
    N: int = 128
    L: int = 512
    include_endpoints: bool = False
    quadrature: str = RIEMANN

    def __post_init__(self):
        for name, least in (("M", 1), ("N", 1), ("L", 2)):
            v = getattr(self, name)
            if int(v) != v or v < least:
                raise InvalidParameterError(f"{name} must be an integer >= {least}, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.quadrature not in (RIEMANN, EXACT):
            raise InvalidParameterError(f"quadrature must be {RIEMANN!r} or {EXACT!r}")


@dataclass(frozen=True)
class WeightMatrices:
    """The four ``s_Z x (M + 1)`` weight matrices of a sieve solution."""

    W1: np.ndarray
    W10: np.ndarray
    W0: np.ndarray
    W01: np.ndarray

    @classmethod
    def from_vector(cls, v: np.ndarray, s_z: int, M: int) -> "WeightMatrices":
        size = s_z * (M + 1)
        blocks = [np.asarray(v[i * size:(i + 1) * size]).reshape(M + 1, s_z).T for i in range(4)]
        return cls(*blocks)

    def vector(self) -> np.ndarray:
        return np.concatenate([W.T.reshape(-1) for W in (self.W1, self.W10, self.W0, self.W01)])

    def max_simplex_violation(self) -> float:
        worst = 0.0
        for W in (self.W1, self.W10, self.W0, self.W01):
            worst = max(worst, float(np.max(-W, initial=0.0)),
                        float(np.max(np.abs(W.sum(axis=1) - 1.0))))
        return worst


Weight = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FunctionalSpec:
    """``Gamma(f) = sum_x int omega_x(y)' f_x(y) dy`` over the instrument-conditional densities.

    ``omega[x]`` maps an array of outcome values of length ``n`` to an
    ``(n, s_Z)`` array; ``None`` means the arm does not enter. ``exact`` may
    supply closed-form coefficients ``int omega_x(y)_z b_m(y) dy`` as a
    function of ``M``. ``units`` tells how the value maps back to the
    original outcome scale.
    """

    tag: str
    omega: tuple
    units: str = LEVEL
    exact: Optional[Callable[[int], tuple]] = field(default=None, repr=False)
    prefer_exact: bool = False

    def __post_init__(self):
        if len(self.omega) != 2:
            raise InvalidParameterError("a functional needs one weight per treatment arm")
        if self.units not in (LEVEL, DIFFERENCE, PROBABILITY):
            raise InvalidParameterError(f"unknown units {self.units!r}")


def _pz(pz) -> np.ndarray:
    p = np.atleast_1d(np.asarray(pz, dtype=float))
    return np.array([1.0 - p[0], p[0]]) if p.size == 1 else p


def ate_functional(pz) -> FunctionalSpec:
    """``E[Y(1)] - E[Y(0)]`` with ``omega_1(y) = -omega_0(y) = y * P(Z = .)``."""
    p = _pz(pz)
    w = lambda y: np.outer(y, p)  # noqa: E731
    exact = lambda M: (-np.outer(p, basis_mean(M)), np.outer(p, basis_mean(M)))  # noqa: E731
    return FunctionalSpec("ate", (lambda y: -w(y), w), DIFFERENCE, exact)


def mean_functional(pz, arm: int) -> FunctionalSpec:
    p = _pz(pz)
    omega = [None, None]
    omega[arm] = lambda y: np.outer(y, p)
    def exact(M):
        G = [np.zeros((p.size, M + 1)), np.zeros((p.size, M + 1))]
        G[arm] = np.outer(p, basis_mean(M))
        return tuple(G)
    return FunctionalSpec(f"mean{arm}", tuple(omega), LEVEL, exact)


def cdf_functional(pz, arm: int, a: float) -> FunctionalSpec:
    """``P(Y(arm) <= a)`` with ``a`` on the unit scale.

    The indicator is integrated exactly against the basis, so ``a = 1``
    gives probability one for every feasible weight matrix.
    """
    if not 0.0 <= a <= 1.0:
        raise InvalidParameterError(f"CDF evaluation point must lie in [0, 1], got {a}")
    p = _pz(pz)
    omega = [None, None]
    omega[arm] = lambda y: np.outer((y <= a).astype(float), p)
    def exact(M):
        G = [np.zeros((p.size, M + 1)), np.zeros((p.size, M + 1))]
        G[arm] = np.outer(p, basis_cdf(M, a))
        return tuple(G)
    return FunctionalSpec(f"cdf{arm}@{a:g}", tuple(omega), PROBABILITY, exact, prefer_exact=True)


def custom_functional(omega0: Optional[Weight], omega1: Optional[Weight], units: str = LEVEL,
                      tag: str = "custom") -> FunctionalSpec:
    return FunctionalSpec(tag, (omega0, omega1), units)


def _require_binary_treatment(table: CondDensityTable) -> None:
    if table.xi.shape[0] != 2:
        raise InvalidInputError(f"continuous bounds need a binary treatment, got {table.xi.shape[0]} levels")


def _check_config(table: CondDensityTable, cfg: SieveConfig) -> None:
    _require_binary_treatment(table)
    if table.M != cfg.M:
        raise BuildError(f"density table has degree {table.M} but the sieve uses M={cfg.M}")


def objective_coefficients(table: CondDensityTable, cfg: SieveConfig, spec: FunctionalSpec) -> tuple:
    """Coefficient matrices ``(G_0, G_1)`` so that ``Gamma = sum_x <G_x, W_x>``."""
    shape = (table.s_z, cfg.M + 1)
    if cfg.quadrature == EXACT or spec.prefer_exact:
        if spec.exact is None:
            raise InvalidParameterError(f"functional {spec.tag!r} has no closed-form coefficients")
        G = tuple(np.asarray(g, dtype=float) for g in spec.exact(cfg.M))
    else:
        t = riemann_nodes(cfg.L)
        basis = bernstein_basis(cfg.M, t)
        G = tuple(np.zeros(shape) if w is None else np.asarray(w(t), dtype=float).T @ basis / cfg.L
                  for w in spec.omega)
    for g in G:
        if g.shape != shape:
            raise BuildError(f"objective coefficients have shape {g.shape}, expected {shape}")
        if not np.all(np.isfinite(g)):
            raise BuildError("functional weights must be bounded")
    return G


@dataclass(frozen=True)
class _ArmSystem:
    """Data for one arm: ``W_x = C + D Q`` and ``(B' kron A) vec(W_x) <= iota kron a``."""

    C: np.ndarray
    D: np.ndarray
    A: np.ndarray
    a: np.ndarray
    B: np.ndarray


def _arm_system(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig, arm: int) -> _ArmSystem:
    other = 1 - arm
    C = table.pi[arm][:, None] * table.weights(arm)
    D = np.diag(table.pi[other])
    cons = build_density_constraints(kind, table.pz, arm)
    B = bernstein_basis(cfg.M, constraint_grid(cfg.N, cfg.include_endpoints)).T
    return _ArmSystem(C, D, cons.lhs, cons.rhs, B)


def _vec(W: np.ndarray) -> np.ndarray:
    return W.T.reshape(-1)


def arm_program(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig, arm,
                G: Optional[np.ndarray] = None, sense: str = MINIMIZE) -> tuple[LinearProgram, float]:
    """Reduced LP for one arm in ``vec(W_{x,1-x})`` and the objective constant.

    The objective value of the full problem restricted to this arm equals
    the LP value plus the returned constant.
    """
    _check_config(table, cfg)
    k = table.arm_index(arm)
    sys = _arm_system(table, kind, cfg, k)
    s_z, width = table.s_z, cfg.M + 1
    n = s_z * width
    if sys.A.shape[0]:
        lhs = np.kron(sys.B.T, sys.A @ sys.D)
        rhs = np.tile(sys.a, sys.B.shape[1]) - _vec(sys.A @ sys.C @ sys.B)
    else:
        lhs, rhs = np.zeros((0, n)), np.zeros(0)
    eq = np.kron(np.ones((1, width)), np.eye(s_z))
    G = np.zeros((s_z, width)) if G is None else G
    program = LinearProgram(_vec(sys.D @ G), sense, lhs, rhs, eq, np.ones(s_z))
    return program, float(np.sum(G * sys.C))


def build_sieve_lp(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig, spec: FunctionalSpec,
                   sense: str = MINIMIZE) -> LinearProgram:
    """The joint LP over ``vec(W_1), vec(W_{1,0}), vec(W_0), vec(W_{0,1})``.

    Matrices are vectorized column by column, so entry ``(z_j, m)`` sits at
    offset ``m * s_Z + j`` inside its block.
    """
    _check_config(table, cfg)
    G0, G1 = objective_coefficients(table, cfg, spec)
    s_z, width = table.s_z, cfg.M + 1
    size = s_z * width
    n = 4 * size
    own = {1: 0, 0: 2}
    ineq, ineq_rhs, eq, eq_rhs = [], [], [], []
    for arm in (1, 0):
        sys = _arm_system(table, kind, cfg, arm)
        lo, hi = own[arm] * size, (own[arm] + 1) * size
        # W_x - (I kron D_{1-x}) vec(W_{x,1-x}) = vec(D_x Xi_x)
        rows = np.zeros((size, n))
        rows[:, lo:hi] = np.eye(size)
        rows[:, hi:hi + size] = -np.kron(np.eye(width), sys.D)
        eq.append(rows)
        eq_rhs.append(_vec(sys.C))
        if sys.A.shape[0]:
            block = np.zeros((sys.A.shape[0] * sys.B.shape[1], n))
            block[:, lo:hi] = np.kron(sys.B.T, sys.A)
            ineq.append(block)
            ineq_rhs.append(np.tile(sys.a, sys.B.shape[1]))
    simplex = np.kron(np.ones((1, width)), np.eye(s_z))
    for b in range(4):
        rows = np.zeros((s_z, n))
        rows[:, b * size:(b + 1) * size] = simplex
        eq.append(rows)
        eq_rhs.append(np.ones(s_z))
    objective = np.zeros(n)
    objective[0:size] = _vec(G1)
    objective[2 * size:3 * size] = _vec(G0)
    return LinearProgram(
        objective, sense,
        np.vstack(ineq) if ineq else np.zeros((0, n)),
        np.concatenate(ineq_rhs) if ineq_rhs else np.zeros(0),
        np.vstack(eq), np.concatenate(eq_rhs),
    )


def arm_feasible(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig, arm,
                 tol: float = FEAS_TOL) -> bool:
    program, _ = arm_program(table, kind, cfg, arm)
    return check_feasible(program.ineq_lhs, program.ineq_rhs, program.eq_lhs, program.eq_rhs, tol=tol)


def sieve_feasible(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig) -> bool:
    return all(arm_feasible(table, kind, cfg, k) for k in (0, 1))


def _to_units(table: CondDensityTable, units: str, iv: IdentifiedInterval) -> IdentifiedInterval:
    amap = table.affine_map
    if units == LEVEL:
        return iv.map(amap.level)
    if units == DIFFERENCE:
        return iv.map(amap.difference)
    return iv


def _arm_ranges(table, kind, cfg, arm: int, Gs: Sequence[np.ndarray]) -> Optional[list]:
    """``(min, max)`` of ``<G, W_x>`` for each ``G``, or ``None`` if the arm is infeasible.

    All objectives share one polytope, so the solves are chained from one
    feasible basis: minima in order, then maxima in order.
    """
    program, _ = arm_program(table, kind, cfg, arm)
    sys = _arm_system(table, kind, cfg, arm)
    objectives = [_vec(sys.D @ G) for G in Gs]
    consts = [float(np.sum(G * sys.C)) for G in Gs]
    sols = solve_lp_many(program, objectives + objectives,
                         [MINIMIZE] * len(Gs) + [MAXIMIZE] * len(Gs))
    if not all(sol.optimal for sol in sols):
        return None
    n = len(Gs)
    return [(sols[i].value + consts[i], sols[n + i].value + consts[i]) for i in range(n)]


def functional_bounds_unit(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig,
                           spec: FunctionalSpec) -> IdentifiedInterval:
    """Bounds on the unit scale, i.e. before mapping back to outcome units."""
    G = objective_coefficients(table, cfg, spec)
    lower = upper = 0.0
    for arm in (0, 1):
        r = _arm_ranges(table, kind, cfg, arm, [G[arm]])
        if r is None:
            return IdentifiedInterval.empty()
        lower += r[0][0]
        upper += r[0][1]
    return IdentifiedInterval(lower, upper)


def functional_bounds(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig,
                      spec: FunctionalSpec) -> IdentifiedInterval:
    """Sharp sieve bounds on ``spec`` in original outcome units."""
    return _to_units(table, spec.units, functional_bounds_unit(table, kind, cfg, spec))


def ate_bounds_continuous(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig) -> IdentifiedInterval:
    return functional_bounds(table, kind, cfg, ate_functional(table.pz))


@dataclass(frozen=True)
class CdfBand:
    """Pointwise bounds on ``P(Y(x) <= a)`` over ``a_grid`` (unit scale).

    ``lower``/``upper`` are monotonized; the ``raw_`` arrays hold the LP values.
    """

    arm: int
    a_grid: np.ndarray
    raw_lower: np.ndarray
    raw_upper: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    feasible: bool
    violation: float

    def levels(self, table: CondDensityTable) -> np.ndarray:
        return np.asarray(table.affine_map.level(self.a_grid))


def default_a_grid(points: int = DEFAULT_A_POINTS) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def _check_a_grid(a_grid) -> np.ndarray:
    a = np.asarray(a_grid, dtype=float).reshape(-1)
    if a.size == 0 or np.any(a < 0) or np.any(a > 1) or np.any(np.diff(a) <= 0):
        raise InvalidParameterError("a_grid must be strictly increasing inside [0, 1]")
    return a


def cdf_bounds(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig, arm,
               a_grid: Optional[Sequence[float]] = None) -> CdfBand:
    _check_config(table, cfg)
    k = table.arm_index(arm)
    a = default_a_grid() if a_grid is None else _check_a_grid(a_grid)
    nan = np.full(a.size, np.nan)
    ranges = None
    if arm_feasible(table, kind, cfg, 1 - k):
        Gs = [np.outer(table.pz, row) for row in basis_cdf(cfg.M, a)]
        ranges = _arm_ranges(table, kind, cfg, k, Gs)
    if ranges is None:
        return CdfBand(k, a, nan, nan, nan, nan, False, 0.0)
    raw_lo = np.clip([r[0] for r in ranges], 0.0, 1.0)
    raw_hi = np.clip([r[1] for r in ranges], 0.0, 1.0)
    lo = np.maximum.accumulate(raw_lo)
    hi = np.minimum.accumulate(raw_hi[::-1])[::-1]
    violation = float(max(np.max(lo - raw_lo), np.max(raw_hi - hi)))
    if violation > MONOTONE_WARN:
        log.warning("CDF band for arm %s needed monotonization of %.4g", table.x_support[k], violation)
    return CdfBand(k, a, raw_lo, raw_hi, lo, hi, True, violation)


def _invert(band: CdfBand, tau: float) -> tuple[float, float]:
    """Outer quantile bounds ``(inf{a: upper >= tau}, inf{a: lower >= tau})`` on the grid."""
    a = band.a_grid
    hit = np.flatnonzero(band.upper >= tau)
    if hit.size == 0:
        q_lo = float(a[-1])
    else:
        i = hit[0]
        q_lo = float(a[i - 1]) if i > 0 else 0.0
    hit = np.flatnonzero(band.lower >= tau)
    q_hi = float(a[hit[0]]) if hit.size else 1.0
    return q_lo, q_hi


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise InvalidParameterError(f"tau must lie in (0, 1), got {tau}")
    return tau


def quantile_bounds(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig, arm, tau: float,
                    a_grid: Optional[Sequence[float]] = None) -> IdentifiedInterval:
    """Bounds on the ``tau``-quantile of ``Y(arm)`` in original units."""
    tau = _check_tau(tau)
    band = cdf_bounds(table, kind, cfg, arm, a_grid)
    if not band.feasible:
        return IdentifiedInterval.empty()
    return IdentifiedInterval(*_invert(band, tau)).map(table.affine_map.level)


def qte_bounds(table: CondDensityTable, kind: ModelKind, cfg: SieveConfig, tau: float,
               a_grid: Optional[Sequence[float]] = None) -> IdentifiedInterval:
    """Bounds on ``Q_{Y(1)}(tau) - Q_{Y(0)}(tau)`` in original units."""
    tau = _check_tau(tau)
    bands = [cdf_bounds(table, kind, cfg, k, a_grid) for k in (0, 1)]
    if not all(b.feasible for b in bands):
        return IdentifiedInterval.empty()
    q0, q1 = (_invert(b, tau) for b in bands)
    return IdentifiedInterval(q1[0] - q0[1], q1[1] - q0[0]).map(table.affine_map.difference)


@dataclass(frozen=True)
class RefutationResult:
    refuted: bool
    integrals: tuple


def refutation_check(table: CondDensityTable, L: int = 512, tol: float = REFUTE_TOL) -> RefutationResult:
    """Independence is refuted when ``int max_z pi(x|z) f(y|x,z) dy > 1`` for some arm."""
    _require_binary_treatment(table)
    t = riemann_nodes(L)
    basis = bernstein_basis(table.M, t)
    integrals = []
    for k in range(table.xi.shape[0]):
        dens = basis @ (table.pi[k][:, None] * table.weights(k)).T
        integrals.append(float(dens.max(axis=1).mean()))
    return RefutationResult(any(v > 1.0 + tol for v in integrals), tuple(integrals))


def _kind(kind) -> ModelKind:
    return kind if isinstance(kind, ModelKind) else ModelKind(kind, 1.0)


def falsification_point_continuous(table: CondDensityTable, kind, cfg: SieveConfig,
                                   tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> float:
    """Smallest ``theta`` making the sieve LP feasible for both arms, within ``tol``."""
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    _check_config(table, cfg)
    kind = _kind(kind)
    worst = 0.0
    for k in (0, 1):
        feasible = lambda t, k=k: arm_feasible(table, kind.at(t), cfg, k)  # noqa: E731
        if feasible(0.0):
            continue
        _, hi = bisect_threshold(feasible, 0.0, 1.0, tol, max_iter)
        worst = max(worst, hi)
    return worst


def breakdown_point_continuous(table: CondDensityTable, kind, cfg: SieveConfig,
                               spec: Optional[FunctionalSpec] = None, value: float = 0.0,
                               tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> BreakdownPoint:
    """Smallest ``theta`` whose sieve bounds on ``spec`` (ATE by default) contain ``value``."""
    kind = _kind(kind)
    spec = ate_functional(table.pz) if spec is None else spec
    theta_lo = falsification_point_continuous(table, kind, cfg, tol, max_iter)
    return breakdown_search(lambda t: functional_bounds(table, kind.at(t), cfg, spec),
                            float(value), theta_lo, tol, max_iter)


def sensitivity_curve_continuous(table: CondDensityTable, kind, cfg: SieveConfig, thetas,
                                 spec: Optional[FunctionalSpec] = None) -> SensitivityCurve:
    grid = validate_grid(thetas)
    kind = _kind(kind)
    spec = ate_functional(table.pz) if spec is None else spec
    intervals = ordered_map(lambda t: functional_bounds(table, kind.at(t), cfg, spec), grid)
    return SensitivityCurve.from_intervals(grid, intervals)
