"""
Grid-based continuous functions I -> R^d.

A GridFunction stores node values on a uniform grid and is linear between
nodes, so the sup-norm computed at the nodes is exact for the representation.
The real line is handled by a compact truncation [-L, L] with zero extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    truncation_of_line: bool = False

    def __post_init__(self):
        lo, up = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(up)):
            raise ValueError(f"Interval bounds must be finite, got [{self.lower}, {self.upper}]")
        if not lo < up:
            raise ValueError(f"Interval needs lower < upper, got [{self.lower}, {self.upper}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def line(cls, half_width: float) -> "Interval":
        """Truncation [-L, L] of the real line."""
        return cls(-float(half_width), float(half_width), True)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, other: "Interval", tol: float = 1e-12) -> bool:
        return other.lower >= self.lower - tol and other.upper <= self.upper + tol

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": self.lower, "upper": self.upper, "line_truncation": self.truncation_of_line}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Interval":
        return cls(
            float(data["lower"]),
            float(data["upper"]),
            bool(data.get("line_truncation", data.get("truncation_of_line", False))),
        )


@dataclass(frozen=True, eq=False)
class GridFunction:
    """
    Values of shape (n_nodes, d); node j sits at lower + j * (upper - lower) / (n_nodes - 1).
    source is set on restrictions and points at the unrestricted function.
    """

    interval: Interval
    values: np.ndarray
    source: Optional["GridFunction"] = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.ndim != 2:
            raise ValueError(f"GridFunction values must be (n_nodes, d), got shape {vals.shape}")
        if vals.shape[0] < 2 or vals.shape[1] < 1:
            raise ValueError(f"GridFunction needs n_nodes >= 2 and d >= 1, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("GridFunction values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, interval: Interval, n_nodes: int, d: int = 1) -> "GridFunction":
        return cls(interval, np.zeros((int(n_nodes), int(d))))

    @classmethod
    def constant(cls, interval: Interval, n_nodes: int, value) -> "GridFunction":
        row = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(interval, np.tile(row, (int(n_nodes), 1)))

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], Any], interval: Interval, n_nodes: int) -> "GridFunction":
        """Sample fn at the nodes; fn maps an array of nodes to (n,) or (n, d)."""
        nodes = np.linspace(interval.lower, interval.upper, int(n_nodes))
        return cls(interval, np.asarray(fn(nodes), dtype=float))

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.interval.lower, self.interval.upper, self.n_nodes)

    @property
    def mesh(self) -> float:
        return self.interval.width / (self.n_nodes - 1)

    def same_grid(self, other: "GridFunction") -> bool:
        return self.interval == other.interval and self.values.shape == other.values.shape

    def __call__(self, u) -> np.ndarray:
        """Evaluate at points u; returns shape (len(u), d)."""
        pts = np.atleast_1d(np.asarray(u, dtype=float))
        lo, up = self.interval.lower, self.interval.upper
        outside = (pts < lo) | (pts > up)
        if np.any(outside) and not self.interval.truncation_of_line:
            bad = pts[outside][0]
            raise ValueError(f"Point {bad} lies outside [{lo}, {up}]")
        nodes = self.nodes
        out = np.column_stack([np.interp(pts, nodes, self.values[:, j]) for j in range(self.d)])
        out[outside] = 0.0
        return out

    def resample(self, n_nodes: int) -> "GridFunction":
        if n_nodes == self.n_nodes:
            return self
        new_nodes = np.linspace(self.interval.lower, self.interval.upper, int(n_nodes))
        return GridFunction(self.interval, self(new_nodes))

    def _aligned(self, other: "GridFunction"):
        if self.interval != other.interval:
            raise ValueError(
                f"Cannot combine functions on different intervals: {self.interval} vs {other.interval}"
            )
        if self.d != other.d:
            raise ValueError(f"Dimension mismatch: d={self.d} vs d={other.d}")
        n = max(self.n_nodes, other.n_nodes)
        return self.resample(n), other.resample(n)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            a, b = self._aligned(other)
            return GridFunction(a.interval, a.values + b.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            a, b = self._aligned(other)
            return GridFunction(a.interval, a.values - b.values)
        return NotImplemented

    def __mul__(self, scalar):
        if isinstance(scalar, GridFunction):
            return NotImplemented
        return GridFunction(self.interval, self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return GridFunction(self.interval, self.values / float(scalar))

    def __neg__(self):
        return GridFunction(self.interval, -self.values)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lower": self.interval.lower,
            "upper": self.interval.upper,
            "line_truncation": self.interval.truncation_of_line,
            "d": self.d,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridFunction":
        vals = np.asarray(data["values"], dtype=float)
        d = int(data.get("d", 1))
        if vals.ndim == 1:
            vals = vals.reshape(-1, d)
        if vals.shape[1] != d:
            raise ValueError(f"GridFunction JSON declares d={d} but rows have {vals.shape[1]} components")
        return cls(Interval.from_dict(data), vals)


@dataclass(frozen=True)
class DiagnosticsConfig:
    xi: float = 0.75
    kappa: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.xi <= 1.0:
            raise ValueError(f"xi must lie in (1/2, 1], got {self.xi}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")


def sup_norm(f: GridFunction) -> float:
    return float(np.max(np.abs(f.values)))


def restrict(f: GridFunction, sub: Interval) -> GridFunction:
    """
    Restrict f to sub, keeping the node density of f.
    When sub's endpoints fall on nodes of f the node values are copied exactly.

    Restrictions are always taken from the unrestricted function (f.source),
    so restricting twice gives the same nodes and values as restricting once
    to the inner interval.
    """
    if not f.interval.contains(sub):
        raise ValueError(f"Interval [{sub.lower}, {sub.upper}] is not contained in "
                         f"[{f.interval.lower}, {f.interval.upper}]")
    if sub.lower == f.interval.lower and sub.upper == f.interval.upper:
        return GridFunction(sub, f.values, f.source)
    base = f.source if f.source is not None else f
    pos_lo = (sub.lower - base.interval.lower) / base.mesh
    pos_up = (sub.upper - base.interval.lower) / base.mesh
    i0, i1 = int(round(pos_lo)), int(round(pos_up))
    if abs(pos_lo - i0) < _ALIGN_TOL and abs(pos_up - i1) < _ALIGN_TOL and i1 - i0 >= 1:
        return GridFunction(sub, base.values[i0 : i1 + 1], base)
    n_sub = max(2, int(round(sub.width / base.mesh)) + 1)
    nodes = np.linspace(sub.lower, sub.upper, n_sub)
    nodes = np.clip(nodes, base.interval.lower, base.interval.upper)
    return GridFunction(sub, base(nodes), base)


def holder_quotient(f: GridFunction, xi: float) -> float:
    """max over node pairs u != v of |f(u) - f(v)| / |u - v|^xi (max-norm over components)."""
    if not 0 < xi <= 1:
        raise ValueError(f"xi must lie in (0, 1], got {xi}")
    nodes = f.nodes
    vals = f.values
    best = 0.0
    # row blocks keep the pair matrix small for fine grids
    step = max(1, 2_000_000 // max(1, f.n_nodes * f.d))
    for start in range(0, f.n_nodes - 1, step):
        stop = min(f.n_nodes - 1, start + step)
        rows = slice(start, stop)
        diff = np.max(np.abs(vals[rows, None, :] - vals[None, :, :]), axis=2)
        dist = np.abs(nodes[rows, None] - nodes[None, :])
        mask = np.arange(f.n_nodes)[None, :] > np.arange(start, stop)[:, None]
        if np.any(mask):
            best = max(best, float(np.max(diff[mask] / dist[mask] ** xi)))
    return best


def tail_sup(f: GridFunction, y: float) -> float:
    if not f.interval.truncation_of_line:
        raise ValueError("tail_sup needs a line-truncation interval")
    if y < 0:
        raise ValueError(f"y must be non-negative, got {y}")
    mask = np.abs(f.nodes) > y
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(f.values[mask])))


def diagnose(f: GridFunction, cfg: DiagnosticsConfig, y_points: Optional[np.ndarray] = None) -> Dict[str, float]:
    """
    Regularity diagnostics: Hölder quotient at cfg.xi and, on line truncations,
    the tail profile max_y tail_sup(f, y)^2 * exp(y^kappa).
    """
    out = {"holder_quotient": holder_quotient(f, cfg.xi), "sup_norm": sup_norm(f)}
    if f.interval.truncation_of_line:
        if y_points is None:
            y_points = np.unique(np.abs(f.nodes))
        profile = [tail_sup(f, y) ** 2 * math.exp(y ** cfg.kappa) for y in y_points]
        out["tail_profile"] = float(max(profile)) if profile else 0.0
    return out


def interpolation_matrix(nodes: np.ndarray, points, zero_outside: bool = False) -> np.ndarray:
    """
    Linear-interpolation weights of each point on increasing nodes, shape (len(points), len(nodes)).
    A point that coincides with a node gets weight exactly 1 on it. Points beyond the
    nodes get a zero row when zero_outside is set, otherwise they are an error.
    """
    nodes = np.asarray(nodes, dtype=float)
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    outside = (pts < nodes[0]) | (pts > nodes[-1])
    if np.any(outside) and not zero_outside:
        raise ValueError(f"Point {pts[outside][0]} lies outside [{nodes[0]}, {nodes[-1]}]")
    A = np.zeros((len(pts), len(nodes)))
    rows = np.nonzero(~outside)[0]
    if len(nodes) == 1:
        A[rows, 0] = 1.0
        return A
    p = pts[rows]
    hi = np.clip(np.searchsorted(nodes, p, side="right"), 1, len(nodes) - 1)
    lo = hi - 1
    w = (p - nodes[lo]) / (nodes[hi] - nodes[lo])
    A[rows, lo] = 1.0 - w
    A[rows, hi] = w
    return A
