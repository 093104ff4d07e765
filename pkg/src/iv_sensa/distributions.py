"""Microdata ingestion and the estimated distributions the bound programs consume."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateOutcomeError, DimensionMismatchError, EstimationError, InvalidInputError

SUPPORT_TOL = 1e-9
MIN_STRATUM = 30


@dataclass(frozen=True)
class Dataset:
    """Rows of ``(y, x, z)`` with optional nonnegative weights.

    ``y`` is numeric; treatment and instrument values are kept as string
    labels so that CSV input round-trips without guessing types.
    """

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        x = np.asarray([str(v) for v in np.asarray(self.x).reshape(-1)], dtype=object)
        z = np.asarray([str(v) for v in np.asarray(self.z).reshape(-1)], dtype=object)
        if not (len(y) == len(x) == len(z)):
            raise DimensionMismatchError(f"column lengths differ: y={len(y)}, x={len(x)}, z={len(z)}")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError(f"non-finite outcome in rows {np.flatnonzero(~np.isfinite(y))[:10].tolist()}")
        missing = [i for i in range(len(x)) if x[i] == "" or z[i] == ""]
        if missing:
            raise InvalidInputError(f"missing treatment or instrument label in rows {missing[:10]}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        if self.w is not None:
            w = np.asarray(self.w, dtype=float).reshape(-1)
            if len(w) != len(y):
                raise DimensionMismatchError(f"weights have length {len(w)}; expected {len(y)}")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise InvalidInputError("weights must be finite and nonnegative")
            object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def weights(self) -> np.ndarray:
        return np.ones(len(self.y)) if self.w is None else self.w

    def with_outcome(self, y) -> "Dataset":
        return replace(self, y=np.asarray(y, dtype=float))


def read_csv(path) -> Dataset:
    """Read a ``y,x,z[,w]`` CSV file with a header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = {"y", "x", "z"} - set(header)
        if missing:
            raise InvalidInputError(f"{path}: missing column(s) {sorted(missing)}")
        reader.fieldnames = header
        ys, xs, zs, ws = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                ys.append(float(row["y"]))
                if "w" in header:
                    ws.append(float(row["w"]))
            except (TypeError, ValueError):
                raise InvalidInputError(f"{path}:{lineno}: non-numeric y or w") from None
            xs.append((row["x"] or "").strip())
            zs.append((row["z"] or "").strip())
    if not ys:
        raise InvalidInputError(f"{path}: no data rows")
    return Dataset(np.array(ys), np.array(xs, dtype=object), np.array(zs, dtype=object),
                   np.array(ws) if ws else None)


def write_csv(data: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y", "x", "z"] + (["w"] if data.w is not None else []))
        for i in range(len(data)):
            row = [repr(float(data.y[i])), data.x[i], data.z[i]]
            if data.w is not None:
                row.append(repr(float(data.w[i])))
            writer.writerow(row)


def _label_order(labels) -> tuple:
    uniq = sorted(set(labels))
    try:
        return tuple(sorted(uniq, key=float))
    except ValueError:
        return tuple(uniq)


@dataclass(frozen=True)
class JointDiscreteDist:
    """Finite-support law of ``(Y, X, Z)``.

    ``cells[i, k, j]`` is ``P(Y = y_i, X = x_k | Z = z_j)``, ``pi[k, j]`` is
    ``P(X = x_k | Z = z_j)`` and ``pz[j]`` is ``P(Z = z_j)``.
    """

    y_support: tuple
    x_support: tuple
    z_support: tuple
    pz: np.ndarray
    pi: np.ndarray
    cells: np.ndarray
    cond_mean_y_given_x: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        ys = tuple(float(v) for v in self.y_support)
        xs = tuple(str(v) for v in self.x_support)
        zs = tuple(str(v) for v in self.z_support)
        pz = np.asarray(self.pz, dtype=float).reshape(-1)
        pi = np.asarray(self.pi, dtype=float)
        cells = np.asarray(self.cells, dtype=float)
        sy, sx, sz = len(ys), len(xs), len(zs)
        if len(set(ys)) != sy or len(set(xs)) != sx or len(set(zs)) != sz:
            raise InvalidInputError("supports must not repeat labels")
        if sy < 2 or sx < 2 or sz < 2:
            raise InvalidInputError("each support needs at least two values")
        if pz.shape != (sz,) or pi.shape != (sx, sz) or cells.shape != (sy, sx, sz):
            raise DimensionMismatchError(
                f"shapes pz={pz.shape}, pi={pi.shape}, cells={cells.shape} do not match supports {(sy, sx, sz)}"
            )
        for name, arr in (("pz", pz), ("pi", pi), ("cells", cells)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} has non-finite entries")
        if abs(pz.sum() - 1.0) > SUPPORT_TOL or np.any(pz <= 0) or np.any(pz >= 1):
            raise InvalidInputError(f"P(Z=z) must lie in (0,1) and sum to one, got {pz.tolist()}")
        if np.any(np.abs(pi.sum(axis=0) - 1.0) > SUPPORT_TOL):
            raise InvalidInputError("propensities pi(x|z) must sum to one over x for every z")
        if np.any(pi <= 0) or np.any(pi >= 1):
            k, j = np.argwhere((pi <= 0) | (pi >= 1))[0]
            raise InvalidInputError(
                f"propensity pi({xs[k]}|{zs[j]}) = {pi[k, j]:.6g} is not in (0,1)"
            )
        if np.any(cells < -SUPPORT_TOL):
            raise InvalidInputError("cell probabilities must be nonnegative")
        if np.any(np.abs(cells.sum(axis=0) - pi) > SUPPORT_TOL):
            raise InvalidInputError("sum over y of P(Y=y,X=x|Z=z) must equal pi(x|z)")
        cells = np.maximum(cells, 0.0)
        for name, val in (("y_support", ys), ("x_support", xs), ("z_support", zs),
                          ("pz", pz), ("pi", pi), ("cells", cells)):
            object.__setattr__(self, name, val)
        px = pi @ pz
        joint_y = np.einsum("ikj,j->ik", cells, pz)
        object.__setattr__(self, "cond_mean_y_given_x", np.asarray(ys) @ joint_y / px)

    @classmethod
    def binary(cls, pz1: float, pi1: Sequence[float], p_y1: Sequence[Sequence[float]]) -> "JointDiscreteDist":
        """Build a binary ``(Y, X, Z)`` law.

        Parameters
        ----------
        pz1 : float
            ``P(Z = 1)``.
        pi1 : (float, float)
            ``(pi(1|0), pi(1|1))``.
        p_y1 : 2x2 nested sequence
            ``p_y1[x][z] = P(Y = 1, X = x | Z = z)``.
        """
        pi1 = np.asarray(pi1, dtype=float)
        pi = np.vstack([1.0 - pi1, pi1])
        p11 = np.asarray(p_y1, dtype=float)
        cells = np.stack([pi - p11, p11])
        return cls((0.0, 1.0), ("0", "1"), ("0", "1"), np.array([1.0 - pz1, pz1]), pi, cells)

    @property
    def s_y(self) -> int:
        return len(self.y_support)

    @property
    def s_x(self) -> int:
        return len(self.x_support)

    @property
    def s_z(self) -> int:
        return len(self.z_support)

    @property
    def is_binary(self) -> bool:
        return self.s_y == 2 and self.s_x == 2 and self.s_z == 2

    def arm_index(self, arm) -> int:
        """Position of treatment ``arm`` given as a label or an integer index."""
        if isinstance(arm, str):
            if arm not in self.x_support:
                raise InvalidInputError(f"unknown treatment label {arm!r}; support is {self.x_support}")
            return self.x_support.index(arm)
        k = int(arm)
        if not 0 <= k < self.s_x:
            raise InvalidInputError(f"treatment index {k} out of range")
        return k

    def p_x(self, arm) -> float:
        return float(self.pi[self.arm_index(arm)] @ self.pz)


def estimate_discrete(data: Dataset, y_support=None, x_support=None, z_support=None) -> JointDiscreteDist:
    """Plug-in (weighted) cell frequencies within each instrument stratum."""
    ys = tuple(float(v) for v in y_support) if y_support is not None else tuple(sorted(set(data.y.tolist())))
    xs = tuple(str(v) for v in x_support) if x_support is not None else _label_order(data.x)
    zs = tuple(str(v) for v in z_support) if z_support is not None else _label_order(data.z)
    yidx = {v: i for i, v in enumerate(ys)}
    xidx = {v: i for i, v in enumerate(xs)}
    zidx = {v: i for i, v in enumerate(zs)}
    bad = [r for r in range(len(data))
           if data.y[r] not in yidx or data.x[r] not in xidx or data.z[r] not in zidx]
    if bad:
        raise InvalidInputError(f"{len(bad)} row(s) outside the declared supports, e.g. rows {bad[:10]}")
    iy = np.array([yidx[v] for v in data.y.tolist()], dtype=int)
    ix = np.array([xidx[v] for v in data.x], dtype=int)
    iz = np.array([zidx[v] for v in data.z], dtype=int)
    w = data.weights
    counts = np.zeros((len(ys), len(xs), len(zs)))
    np.add.at(counts, (iy, ix, iz), w)
    mass_z = counts.sum(axis=(0, 1))
    for j, m in enumerate(mass_z):
        if m <= 0:
            raise EstimationError(f"instrument stratum z={zs[j]!r} is empty")
    cells = counts / mass_z
    pz = mass_z / mass_z.sum()
    try:
        return JointDiscreteDist(ys, xs, zs, pz, cells.sum(axis=0), cells)
    except InvalidInputError as exc:
        raise EstimationError(f"estimated distribution is degenerate: {exc}") from None


def empirical_quantile(y: np.ndarray, q: float, w: Optional[np.ndarray] = None) -> float:
    """Smallest observed value whose (weighted) empirical CDF reaches ``q``."""
    order = np.argsort(y, kind="stable")
    ys = np.asarray(y)[order]
    ws = np.ones(len(ys)) if w is None else np.asarray(w)[order]
    cdf = np.cumsum(ws) / ws.sum()
    k = int(np.searchsorted(cdf, q - 1e-12, side="left"))
    return float(ys[min(k, len(ys) - 1)])


def discretize_outcome(data: Dataset, quantile: float) -> Dataset:
    """Replace ``y`` by ``1(y <= empirical quantile)``; ties go to the indicator."""
    if not 0.0 < quantile < 1.0:
        raise InvalidInputError(f"quantile must be in (0,1), got {quantile}")
    if np.ptp(data.y) == 0:
        raise DegenerateOutcomeError("outcome is constant; cannot discretize")
    cut = empirical_quantile(data.y, quantile, data.w)
    return data.with_outcome((data.y <= cut).astype(float))


@dataclass(frozen=True)
class AffineMap:
    """``y = shift + scale * u`` between original units and the unit interval."""

    shift: float = 0.0
    scale: float = 1.0

    def to_unit(self, y):
        return (np.asarray(y, dtype=float) - self.shift) / self.scale

    def level(self, u):
        """Map a location (mean, quantile, grid point) back to original units."""
        return self.shift + self.scale * np.asarray(u, dtype=float)

    def difference(self, d):
        """Map a difference of locations (ATE, QTE) back to original units."""
        return self.scale * np.asarray(d, dtype=float)


def rescale_outcome(data: Dataset) -> tuple[Dataset, AffineMap]:
    """Map outcomes onto [0, 1]; data already inside [0, 1] is left unchanged."""
    lo, hi = float(data.y.min()), float(data.y.max())
    if hi == lo:
        raise DegenerateOutcomeError("outcome is constant; cannot rescale")
    if lo >= 0.0 and hi <= 1.0:
        return data, AffineMap(0.0, 1.0)
    amap = AffineMap(lo, hi - lo)
    return data.with_outcome(np.clip(amap.to_unit(data.y), 0.0, 1.0)), amap


@dataclass(frozen=True)
class CondDensityTable:
    """Conditional outcome densities on the Bernstein grid ``{0, 1/M, ..., 1}``.

    ``xi[k, j, m]`` is the density of ``Y`` given ``X = x_k, Z = z_j`` at
    ``m / M``; ``pi`` and ``pz`` are as in :class:`JointDiscreteDist`.
    """

    xi: np.ndarray
    pi: np.ndarray
    pz: np.ndarray
    affine_map: AffineMap = AffineMap()
    x_support: tuple = ("0", "1")
    z_support: tuple = ("0", "1")

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        pz = np.asarray(self.pz, dtype=float).reshape(-1)
        if xi.ndim != 3 or xi.shape[2] < 2:
            raise DimensionMismatchError(f"xi must have shape (s_X, s_Z, M+1) with M >= 1, got {xi.shape}")
        sx, sz, _ = xi.shape
        if pi.shape != (sx, sz) or pz.shape != (sz,):
            raise DimensionMismatchError(f"pi {pi.shape} / pz {pz.shape} do not match xi {xi.shape}")
        if len(self.x_support) != sx or len(self.z_support) != sz:
            raise DimensionMismatchError("support labels do not match xi")
        if not np.all(np.isfinite(xi)) or np.any(xi < 0):
            raise InvalidInputError("density values must be finite and nonnegative")
        if abs(pz.sum() - 1.0) > SUPPORT_TOL or np.any(pz <= 0) or np.any(pz >= 1):
            raise InvalidInputError("P(Z=z) must lie in (0,1) and sum to one")
        if np.any(np.abs(pi.sum(axis=0) - 1.0) > SUPPORT_TOL) or np.any(pi <= 0) or np.any(pi >= 1):
            raise InvalidInputError("propensities must lie in (0,1) and sum to one over x")
        mass = self.mass(xi)
        if np.any(mass < 0.9) or np.any(mass > 1.1):
            raise InvalidInputError(f"Bernstein masses {mass.round(4).tolist()} outside [0.9, 1.1]")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "pz", pz)
        object.__setattr__(self, "x_support", tuple(str(v) for v in self.x_support))
        object.__setattr__(self, "z_support", tuple(str(v) for v in self.z_support))

    @staticmethod
    def mass(xi: np.ndarray) -> np.ndarray:
        return xi.sum(axis=-1) / xi.shape[-1]

    @property
    def M(self) -> int:
        return self.xi.shape[2] - 1

    @property
    def s_z(self) -> int:
        return self.xi.shape[1]

    def arm_index(self, arm) -> int:
        if isinstance(arm, str):
            if arm not in self.x_support:
                raise InvalidInputError(f"unknown treatment label {arm!r}")
            return self.x_support.index(arm)
        k = int(arm)
        if not 0 <= k < self.xi.shape[0]:
            raise InvalidInputError(f"treatment index {k} out of range")
        return k

    def weights(self, arm) -> np.ndarray:
        """Simplex weights of the Bernstein approximation of each ``(x, z)`` density."""
        xi = self.xi[self.arm_index(arm)]
        return xi / xi.sum(axis=1, keepdims=True)


def _weighted_quantile(v: np.ndarray, w: np.ndarray, q: float) -> float:
    order = np.argsort(v)
    cw = np.cumsum(w[order])
    return float(np.interp(q * cw[-1], cw, v[order]))


def silverman_bandwidth(y: np.ndarray, w: Optional[np.ndarray] = None) -> float:
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    wn = w / w.sum()
    mean = wn @ y
    sd = math.sqrt(max(wn @ (y - mean) ** 2, 0.0))
    iqr = _weighted_quantile(y, w, 0.75) - _weighted_quantile(y, w, 0.25)
    spread = [s for s in (sd, iqr / 1.34) if s > 0]
    n_eff = w.sum() ** 2 / (w @ w)
    return 0.9 * min(spread) * n_eff ** -0.2 if spread else 0.0


def reflected_kde(y: np.ndarray, grid: np.ndarray, w: Optional[np.ndarray] = None,
                  bandwidth: Optional[float] = None) -> np.ndarray:
    """Gaussian KDE on [0, 1] with reflection about both boundaries."""
    y = np.asarray(y, dtype=float)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    h = silverman_bandwidth(y, w) if bandwidth is None else bandwidth
    if not np.isfinite(h) or h <= 0:
        raise EstimationError(f"bandwidth {h!r} is not positive and finite")
    wn = w / w.sum()
    out = np.zeros(len(grid))
    for centre in (y, -y, 2.0 - y):
        u = (grid[:, None] - centre[None, :]) / h
        out += np.exp(-0.5 * u * u) @ wn
    return out / (h * math.sqrt(2.0 * math.pi))


def estimate_cond_density(data: Dataset, M: int, *, min_stratum: int = MIN_STRATUM,
                          affine_map: Optional[AffineMap] = None,
                          x_support=None, z_support=None) -> CondDensityTable:
    """Reflected-KDE estimates of ``f(y | x, z)`` on the grid ``m / M``.

    Each row is rescaled so that its Bernstein mass ``sum(xi) / (M + 1)`` is
    exactly one. Outcomes must already lie in [0, 1]; see
    :func:`rescale_outcome`.
    """
    if M < 1:
        raise InvalidInputError("Bernstein degree M must be at least 1")
    if data.y.min() < 0.0 or data.y.max() > 1.0:
        raise InvalidInputError("outcomes must lie in [0, 1]; rescale first")
    xs = tuple(str(v) for v in x_support) if x_support is not None else _label_order(data.x)
    zs = tuple(str(v) for v in z_support) if z_support is not None else _label_order(data.z)
    grid = np.arange(M + 1) / M
    w = data.weights
    xi = np.zeros((len(xs), len(zs), M + 1))
    mass = np.zeros((len(xs), len(zs)))
    for k, xl in enumerate(xs):
        for j, zl in enumerate(zs):
            rows = (data.x == xl) & (data.z == zl)
            n = int(rows.sum())
            if n < min_stratum:
                raise EstimationError(f"stratum x={xl!r}, z={zl!r} has {n} rows; need at least {min_stratum}")
            mass[k, j] = w[rows].sum()
            dens = reflected_kde(data.y[rows], grid, w[rows])
            total = dens.sum()
            if not np.isfinite(total) or total <= 0:
                raise EstimationError(f"density estimate for x={xl!r}, z={zl!r} vanishes on the grid")
            xi[k, j] = dens * (M + 1) / total
    mz = mass.sum(axis=0)
    if np.any(mz <= 0):
        raise EstimationError("an instrument stratum has zero total weight")
    pi = mass / mz
    pz = mz / mz.sum()
    try:
        return CondDensityTable(xi, pi, pz, affine_map or AffineMap(), xs, zs)
    except InvalidInputError as exc:
        raise EstimationError(f"estimated density table is degenerate: {exc}") from None
