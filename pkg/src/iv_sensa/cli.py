"""Command-line front end.

Exit codes: 0 on success, 2 when the identified set is empty (or the
refutation check fires), 1 on usage or data errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import continuous as cont
from . import discrete as disc
from .distributions import (
    discretize_outcome, estimate_cond_density, estimate_discrete, read_csv,
    rescale_outcome, write_csv,
)
from .errors import IvSensaError
from .models import MODEL_TAGS, ModelKind
from .output import CSV, FORMATS, emit_curve, format_number, render_curve, write_atomic
from .results import IdentifiedInterval, SensitivityCurve
from .search import DEFAULT_TOL
from ._parallel import ordered_map

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_EMPTY = 2

DISCRETE = "discrete"
CONTINUOUS = "continuous"
DISCRETE_TARGETS = ("ate", "att", "prob", "pmf", "mean")
CONTINUOUS_TARGETS = ("ate", "mean", "cdf", "qte")
ALL_TARGETS = tuple(dict.fromkeys(DISCRETE_TARGETS + CONTINUOUS_TARGETS))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports problems with exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_theta_grid(spec: str) -> np.ndarray:
    """``start:stop:step``, inclusive of both ends.

    When ``step`` does not divide the range (within 1e-12) the grid stops
    at the last step below ``stop`` and then ``stop`` itself.
    """
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"theta grid {spec!r} must look like start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"theta grid {spec!r} has a non-numeric field") from None
    if not all(math.isfinite(v) for v in (start, stop, step)) or step <= 0 or stop < start:
        raise UsageError(f"theta grid {spec!r} needs start <= stop and step > 0")
    if not (0.0 <= start and stop <= 1.0):
        raise UsageError(f"theta grid {spec!r} must lie in [0, 1]")
    count = (stop - start) / step
    n = int(math.floor(count + 1e-12))
    grid = [start + k * step for k in range(n + 1)]
    if abs(count - round(count)) <= 1e-12:
        grid[-1] = stop
    elif stop - grid[-1] > 1e-12:
        grid.append(stop)
    return np.round(np.array(grid), 12)


@dataclass
class Context:
    """Data prepared once per invocation."""

    pipeline: str
    dist: object = None
    table: object = None
    cfg: Optional[cont.SieveConfig] = None


def _pipeline(args) -> str:
    wanted = args.pipeline
    needs_continuous = args.command in ("cdf-band", "qte", "refute") or getattr(args, "target", None) in ("cdf", "qte")
    if wanted is None:
        return CONTINUOUS if needs_continuous else DISCRETE
    if wanted == DISCRETE and needs_continuous:
        raise UsageError(f"{args.command} with this target needs --pipeline continuous")
    return wanted


def load_context(args) -> Context:
    data = read_csv(args.input)
    pipeline = _pipeline(args)
    if args.quantile is not None:
        if pipeline == CONTINUOUS:
            raise UsageError("--quantile discretizes the outcome; it cannot be combined with the continuous pipeline")
        data = discretize_outcome(data, args.quantile)
    if pipeline == DISCRETE:
        return Context(DISCRETE, dist=estimate_discrete(data))
    unit, amap = rescale_outcome(data)
    table = estimate_cond_density(unit, args.M, min_stratum=args.min_stratum, affine_map=amap)
    cfg = cont.SieveConfig(M=args.M, N=args.N, L=args.L, include_endpoints=args.include_endpoints)
    return Context(CONTINUOUS, table=table, cfg=cfg)


def _need(args, name: str, why: str):
    value = getattr(args, name, None)
    if value is None:
        raise UsageError(f"--{name.replace('_', '-')} is required {why}")
    return value


def _arm(ctx: Context, args):
    label = _need(args, "arm", f"for target {args.target!r}")
    if ctx.pipeline == DISCRETE:
        return ctx.dist.arm_index(label)
    return ctx.table.arm_index(label)


def _continuous_interval(ctx: Context, kind: ModelKind, args) -> IdentifiedInterval:
    table, cfg = ctx.table, ctx.cfg
    target = args.target
    if target == "ate":
        return cont.functional_bounds(table, kind, cfg, cont.ate_functional(table.pz))
    if target == "mean":
        return cont.functional_bounds(table, kind, cfg, cont.mean_functional(table.pz, _arm(ctx, args)))
    if target == "cdf":
        a = float(_need(args, "a", "for target 'cdf'"))
        u = float(np.clip(table.affine_map.to_unit(a), 0.0, 1.0))
        return cont.functional_bounds(table, kind, cfg, cont.cdf_functional(table.pz, _arm(ctx, args), u))
    tau = _need(args, "tau", "for target 'qte'")
    return cont.qte_bounds(table, kind, cfg, tau, cont.default_a_grid(args.a_points))


def interval_at(ctx: Context, kind: ModelKind, args) -> IdentifiedInterval:
    """Bounds on ``args.target`` at one parameter value."""
    if ctx.pipeline == DISCRETE:
        if args.target not in DISCRETE_TARGETS:
            raise UsageError(f"target {args.target!r} needs the continuous pipeline")
        arm = _arm(ctx, args) if args.target in ("prob", "pmf", "mean") else None
        y = _need(args, "y", "for target 'pmf'") if args.target == "pmf" else None
        return disc.target_bounds(ctx.dist, kind, args.target, arm=arm, y=y)
    if args.target not in CONTINUOUS_TARGETS:
        raise UsageError(f"target {args.target!r} is not available for the continuous pipeline")
    return _continuous_interval(ctx, kind, args)


def curve_for(ctx: Context, model: str, grid, args) -> SensitivityCurve:
    """Same values as the library curve functions for the matching targets."""
    kind = ModelKind(model, 1.0)
    if ctx.pipeline == DISCRETE and args.target in DISCRETE_TARGETS:
        arm = _arm(ctx, args) if args.target in ("prob", "pmf", "mean") else None
        y = _need(args, "y", "for target 'pmf'") if args.target == "pmf" else None
        return disc.sensitivity_curve(ctx.dist, kind, grid, args.target, arm=arm, y=y)
    grid = np.asarray(grid, dtype=float)
    intervals = ordered_map(lambda t: interval_at(ctx, kind.at(t), args), grid)
    return SensitivityCurve.from_intervals(grid, intervals)


def _interval_text(iv: IdentifiedInterval) -> str:
    return f"[{format_number(iv.lower)}, {format_number(iv.upper)}]" if iv.feasible else "empty"


def _emit_text(args, text: str) -> None:
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def cmd_bounds(args) -> int:
    ctx = load_context(args)
    theta = _need(args, "theta", "for bounds")
    iv = interval_at(ctx, ModelKind(args.model, theta), args)
    if args.output:
        emit_curve(SensitivityCurve.from_intervals([theta], [iv]), args.output, args.format)
    print(_interval_text(iv))
    if not iv.feasible:
        print(f"identified set is empty at theta={format_number(theta)}", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_curve(args) -> int:
    ctx = load_context(args)
    grid = parse_theta_grid(_need(args, "theta_grid", "for curve"))
    curve = curve_for(ctx, args.model, grid, args)
    _emit_text(args, render_curve(curve, args.format))
    return EXIT_OK


def _falsification(ctx: Context, args) -> float:
    if ctx.pipeline == DISCRETE:
        return disc.falsification_point(ctx.dist, args.model, args.tol)
    return cont.falsification_point_continuous(ctx.table, args.model, ctx.cfg, args.tol)


def cmd_falsification(args) -> int:
    ctx = load_context(args)
    print(f"falsification_point={format_number(_falsification(ctx, args))}")
    return EXIT_OK


def cmd_breakdown(args) -> int:
    ctx = load_context(args)
    if ctx.pipeline == DISCRETE:
        if args.target not in disc.BREAKDOWN_TARGETS:
            raise UsageError(f"breakdown supports targets {disc.BREAKDOWN_TARGETS}")
        bp = disc.breakdown_point(ctx.dist, args.model, args.target, args.value, args.tol)
    else:
        if args.target != "ate":
            raise UsageError("continuous breakdown supports target 'ate'")
        bp = cont.breakdown_point_continuous(ctx.table, args.model, ctx.cfg, None, args.value, args.tol)
    shown = "never" if bp.never else format_number(bp.theta)
    print(f"breakdown_point={shown}")
    print(f"falsification_point={format_number(bp.falsification_point)}")
    return EXIT_OK


def cmd_cdf_band(args) -> int:
    ctx = load_context(args)
    theta = _need(args, "theta", "for cdf-band")
    band = cont.cdf_bounds(ctx.table, ModelKind(args.model, theta), ctx.cfg, _arm(ctx, args),
                           cont.default_a_grid(args.a_points))
    if not band.feasible:
        print(f"identified set is empty at theta={format_number(theta)}", file=sys.stderr)
        return EXIT_EMPTY
    lines = ["a,lower,upper"]
    for a, lo, hi in zip(band.levels(ctx.table), band.lower, band.upper):
        lines.append(f"{format_number(a)},{format_number(lo)},{format_number(hi)}")
    _emit_text(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_qte(args) -> int:
    args.target = "qte"
    if args.theta_grid is not None:
        return cmd_curve(args)
    return cmd_bounds(args)


def cmd_refute(args) -> int:
    ctx = load_context(args)
    res = cont.refutation_check(ctx.table, args.L)
    print(f"refuted={'true' if res.refuted else 'false'}")
    for label, v in zip(ctx.table.x_support, res.integrals):
        print(f"integral[x={label}]={format_number(v)}")
    return EXIT_EMPTY if res.refuted else EXIT_OK


def cmd_discretize(args) -> int:
    data = read_csv(args.input)
    q = _need(args, "quantile", "for discretize")
    out = discretize_outcome(data, q)
    if not args.output:
        raise UsageError("--output is required for discretize")
    write_csv(out, args.output)
    return EXIT_OK


COMMANDS = {
    "bounds": cmd_bounds,
    "curve": cmd_curve,
    "falsification-point": cmd_falsification,
    "breakdown": cmd_breakdown,
    "cdf-band": cmd_cdf_band,
    "qte": cmd_qte,
    "refute": cmd_refute,
    "discretize": cmd_discretize,
}


def _unit_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 1]")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{text} must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", required=True, help="CSV with columns y,x,z[,w]")
    common.add_argument("--model", choices=MODEL_TAGS, default="cdep")
    common.add_argument("--pipeline", choices=(DISCRETE, CONTINUOUS), default=None,
                        help="discrete outcome LP or Bernstein sieve (default depends on the command)")
    common.add_argument("--theta", type=_unit_float)
    common.add_argument("--theta-grid", dest="theta_grid", help="start:stop:step, inclusive")
    common.add_argument("--target", choices=ALL_TARGETS, default="ate")
    common.add_argument("--arm", help="treatment label for arm-specific targets")
    common.add_argument("--y", help="outcome value for target pmf")
    common.add_argument("--a", type=float, help="evaluation point for target cdf, original units")
    common.add_argument("--tau", type=float)
    common.add_argument("--value", type=float, default=0.0, help="reference value for breakdown")
    common.add_argument("--quantile", type=float, help="binarize the outcome at this quantile first")
    common.add_argument("--M", type=int, default=30)
    common.add_argument("--N", type=int, default=128)
    common.add_argument("--L", type=int, default=512)
    common.add_argument("--include-endpoints", action="store_true",
                        help="also impose the model at outcome values 0 and 1")
    common.add_argument("--a-points", dest="a_points", type=int, default=cont.DEFAULT_A_POINTS)
    common.add_argument("--min-stratum", dest="min_stratum", type=int, default=30)
    common.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL)
    common.add_argument("--output")
    common.add_argument("--format", choices=FORMATS, default=CSV)

    parser = _Parser(prog="iv-sensa", description="Sensitivity analysis for instrumental variables.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, IvSensaError, OSError) as exc:
        print(f"iv-sensa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
