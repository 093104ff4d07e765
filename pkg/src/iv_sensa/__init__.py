"""Partial identification of treatment effects with imperfect instruments.

Bounds on average, treated and quantile effects when the instrument may
violate exclusion or exogeneity to a degree indexed by ``theta`` in [0, 1],
for discrete outcomes (small LPs) and continuous outcomes (Bernstein sieve).
"""

from .continuous import (
    CdfBand, FunctionalSpec, SieveConfig, WeightMatrices, ate_functional, build_sieve_lp,
    breakdown_point_continuous, cdf_bounds, cdf_functional, custom_functional,
    falsification_point_continuous, functional_bounds, mean_functional, qte_bounds,
    quantile_bounds, refutation_check, sensitivity_curve_continuous,
)
from .discrete import (
    NoAssumptionBox, ate_bounds, att_bounds, breakdown_point, falsification_point, mean_bounds,
    noassumption_box, pmf_bounds, potential_prob_bounds, sensitivity_curve,
)
from .distributions import (
    AffineMap, CondDensityTable, Dataset, JointDiscreteDist, discretize_outcome,
    estimate_cond_density, estimate_discrete, read_csv, rescale_outcome, write_csv,
)
from .errors import (
    BuildError, DegenerateOutcomeError, DimensionMismatchError, EstimationError,
    FormMismatchError, InvalidInputError, InvalidParameterError, IvSensaError, SolverError,
)
from .lp import LinearProgram, LpSolution, check_feasible, solve_lp, solve_lp_many
from .models import CDEP, KS, MSM, LinearConstraintSet, ModelKind, build_density_constraints, build_discrete_constraints
from .output import emit_curve, parse_curve, render_curve
from .results import BreakdownPoint, CurveRow, IdentifiedInterval, SensitivityCurve

__version__ = "0.1.0"
