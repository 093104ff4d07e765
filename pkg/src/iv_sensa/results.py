"""Result containers shared by the discrete and continuous pipelines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError

_ORDER_TOL = 1e-12


@dataclass(frozen=True)
class IdentifiedInterval:
    """``[lower, upper]`` or, when ``feasible`` is false, the empty set."""

    lower: Optional[float]
    upper: Optional[float]
    feasible: bool = True

    def __post_init__(self):
        if not self.feasible:
            object.__setattr__(self, "lower", None)
            object.__setattr__(self, "upper", None)
            return
        lo, hi = float(self.lower), float(self.upper)
        if lo > hi + 1e-9:
            raise InvalidInputError(f"lower bound {lo} exceeds upper bound {hi}")
        # solver noise on point-identified sets
        if lo > hi:
            lo = hi = 0.5 * (lo + hi)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def empty(cls) -> "IdentifiedInterval":
        return cls(None, None, False)

    @property
    def width(self) -> float:
        return self.upper - self.lower if self.feasible else float("nan")

    def contains(self, value: float, tol: float = _ORDER_TOL) -> bool:
        return self.feasible and self.lower - tol <= value <= self.upper + tol

    def within(self, other: "IdentifiedInterval", tol: float = 1e-9) -> bool:
        """True when this interval is a subset of ``other``."""
        if not self.feasible:
            return True
        return other.feasible and other.lower - tol <= self.lower and self.upper <= other.upper + tol

    def map(self, fn) -> "IdentifiedInterval":
        """Apply an increasing map to both endpoints."""
        if not self.feasible:
            return self
        return IdentifiedInterval(float(fn(self.lower)), float(fn(self.upper)))


@dataclass(frozen=True)
class CurveRow:
    theta: float
    lower: Optional[float]
    upper: Optional[float]
    feasible: bool


@dataclass(frozen=True)
class SensitivityCurve:
    """Identified intervals tabulated over an increasing grid of ``theta``."""

    rows: tuple

    def __post_init__(self):
        rows = tuple(self.rows)
        thetas = [r.theta for r in rows]
        if any(b <= a for a, b in zip(thetas, thetas[1:])):
            raise InvalidInputError("theta values of a curve must be strictly increasing")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_intervals(cls, thetas: Sequence[float], intervals: Sequence[IdentifiedInterval]) -> "SensitivityCurve":
        return cls(tuple(CurveRow(float(t), iv.lower, iv.upper, iv.feasible)
                         for t, iv in zip(thetas, intervals)))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self.rows])

    def interval(self, k: int) -> IdentifiedInterval:
        r = self.rows[k]
        return IdentifiedInterval(r.lower, r.upper, r.feasible)

    def nesting_violations(self, tol: float = 1e-9) -> int:
        """Count feasible rows that fail to contain their feasible predecessor."""
        bad = 0
        prev = None
        for k in range(len(self.rows)):
            cur = self.interval(k)
            if prev is not None and prev.feasible and not prev.within(cur, tol):
                bad += 1
            prev = cur
        return bad


@dataclass(frozen=True)
class BreakdownPoint:
    """Smallest ``theta`` whose identified set contains a reference value.

    ``theta`` is ``None`` when the value lies outside the identified set even
    at ``theta = 1``.
    """

    theta: Optional[float]
    falsification_point: float
    bracket: tuple = (None, None)

    @property
    def never(self) -> bool:
        return self.theta is None
