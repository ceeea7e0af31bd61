"""
Partial-sum field of a functional series and its grid discretization.

P_N(lambda, u) = N^{-1/2} * sum_{i <= floor(lambda N)} (X_i(u) - center_i(u)),
linearly interpolated in lambda between the rows k/N and linearly in u between
nodes. The same container holds Brownian samples on arbitrary lambda grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence, Union

import numpy as np

from config import DEFAULT_RHO, DEFAULT_SIGMA_MESH, GRID_COUNT_CONSTANT
from funcspace import GridFunction, Interval, interpolation_matrix

Centers = Union[str, GridFunction, Sequence[GridFunction]]


@dataclass(frozen=True, eq=False)
class PartialSumField:
    """values has shape (len(lambda_grid), n_nodes, d); row 0 is the empty sum."""

    N: int
    lambda_grid: np.ndarray
    interval: Interval
    values: np.ndarray
    centered: bool = True
    centering: str = "exact"

    def __post_init__(self):
        lam = np.asarray(self.lambda_grid, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 3 or vals.shape[0] != len(lam):
            raise ValueError(f"values must be (len(lambda_grid), n_nodes, d), got {vals.shape} for {len(lam)} rows")
        if len(lam) < 2 or lam[0] != 0.0 or np.any(np.diff(lam) <= 0):
            raise ValueError("lambda_grid must start at 0 and be strictly increasing")
        lam.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "lambda_grid", lam)
        object.__setattr__(self, "values", vals)

    @property
    def u_grid(self) -> np.ndarray:
        return np.linspace(self.interval.lower, self.interval.upper, self.values.shape[1])

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    @property
    def d(self) -> int:
        return self.values.shape[2]

    def row(self, k: int) -> GridFunction:
        return GridFunction(self.interval, self.values[k])

    def evaluate(self, lambdas, us) -> np.ndarray:
        """Field on the product lambdas x us, shape (len(lambdas), len(us), d)."""
        lams = np.atleast_1d(np.asarray(lambdas, dtype=float))
        grid = self.lambda_grid
        if np.any(lams < grid[0]) or np.any(lams > grid[-1]):
            raise ValueError(f"lambda must lie in [{grid[0]}, {grid[-1]}], got {lams.min()}..{lams.max()}")
        A = interpolation_matrix(self.u_grid, us, zero_outside=self.interval.truncation_of_line)
        idx = np.clip(np.searchsorted(grid, lams, side="right") - 1, 0, len(grid) - 2)
        frac = (lams - grid[idx]) / (grid[idx + 1] - grid[idx])
        lower = self.values[idx]
        rows = lower + frac[:, None, None] * (self.values[idx + 1] - lower)
        return np.einsum("un,lnd->lud", A, rows)


def build_partial_sum(series: Sequence[GridFunction], centers: Centers = "empirical") -> PartialSumField:
    """
    Cumulative sums of the centered series scaled by 1/sqrt(N).
    centers: one GridFunction per observation, a single GridFunction used for all,
    or "empirical" for the sample mean of the series.
    """
    if len(series) == 0:
        raise ValueError("Cannot build a partial sum from an empty series")
    first = series[0]
    for i, x in enumerate(series):
        if not x.same_grid(first):
            raise ValueError(f"Series element {i} is not on the grid of element 0")
    N = len(series)
    X = np.stack([x.values for x in series])

    if isinstance(centers, str):
        if centers != "empirical":
            raise ValueError(f"Unknown centering mode {centers!r}; use 'empirical' or pass centers")
        C = np.broadcast_to(X.mean(axis=0), X.shape)
        label = "empirical"
    elif isinstance(centers, GridFunction):
        if not centers.same_grid(first):
            raise ValueError("Center function is not on the grid of the series")
        C = np.broadcast_to(centers.values, X.shape)
        label = "exact"
    else:
        if len(centers) != N:
            raise ValueError(f"Got {len(centers)} centers for {N} observations")
        for i, c in enumerate(centers):
            if not c.same_grid(first):
                raise ValueError(f"Center {i} is not on the grid of the series")
        C = np.stack([c.values for c in centers])
        label = "exact"

    return _cumulate(X, C, first.interval, label)


def _cumulate(X: np.ndarray, C: np.ndarray, interval: Interval, label: str) -> PartialSumField:
    N = X.shape[0]
    cum = np.cumsum(X - C, axis=0) / math.sqrt(N)
    values = np.concatenate([np.zeros((1,) + X.shape[1:]), cum], axis=0)
    return PartialSumField(N, np.arange(N + 1) / N, interval, values, True, label)


def partial_sum_from_block(block: np.ndarray, interval: Interval, center: Union[str, np.ndarray] = "empirical") -> PartialSumField:
    """build_partial_sum for an (N, n_nodes, d) array of node values and one shared center."""
    X = np.asarray(block, dtype=float)
    if X.ndim != 3 or X.shape[0] == 0:
        raise ValueError(f"Expected a non-empty (N, n_nodes, d) block, got shape {X.shape}")
    if isinstance(center, str):
        if center != "empirical":
            raise ValueError(f"Unknown centering mode {center!r}")
        return _cumulate(X, np.broadcast_to(X.mean(axis=0), X.shape), interval, "empirical")
    C = np.asarray(center, dtype=float)
    if C.shape != X.shape[1:]:
        raise ValueError(f"Center of shape {C.shape} does not match the block grid {X.shape[1:]}")
    return _cumulate(X, np.broadcast_to(C, X.shape), interval, "exact")


def eval_linear(P: PartialSumField, lam: float, u: float) -> np.ndarray:
    """P^lin(lam, u) as a vector of length d."""
    return P.evaluate([lam], [u])[0, 0]


def field_frame(P: PartialSumField):
    """Long table with columns k, lambda, u_index, u, component, value."""
    import pandas as pd

    K, n, d = P.values.shape
    k, g, c = np.meshgrid(np.arange(K), np.arange(n), np.arange(d), indexing="ij")
    return pd.DataFrame(
        {
            "k": k.ravel(),
            "lambda": P.lambda_grid[k.ravel()],
            "u_index": g.ravel(),
            "u": P.u_grid[g.ravel()],
            "component": c.ravel(),
            "value": P.values.ravel(),
        }
    )


def export_csv(P: PartialSumField, path: Union[str, Path]) -> Path:
    out = Path(path)
    try:
        field_frame(P).to_csv(out, index=False)
    except OSError as e:
        raise OSError(f"Could not write partial-sum CSV to {out}: {e}") from e
    return out


# ---------------------------------------------------------------------------
# Discretization grid
# ---------------------------------------------------------------------------


def _ceil(x: float) -> int:
    # N ** a is not always exact in floating point (16 ** 0.75 -> 8.000000000000002)
    return max(1, math.ceil(x - 1e-9))


def _cell_centers(lo: float, hi: float, count: int) -> np.ndarray:
    width = (hi - lo) / count
    return lo + width * (np.arange(count) + 0.5)


def _max_gap(points: np.ndarray, lo: float, hi: float) -> float:
    gaps = [points[0] - lo, hi - points[-1]]
    if len(points) > 1:
        gaps.append(float(np.max(np.diff(points))) / 2)
    return float(max(gaps))


@dataclass(frozen=True, eq=False)
class DiscretizationGrid:
    N: int
    rho: float
    sigma_mesh: float
    lambda_points: np.ndarray
    u_points: np.ndarray
    c_count: float = GRID_COUNT_CONSTANT

    @property
    def total_points(self) -> int:
        return len(self.lambda_points) * len(self.u_points)

    @property
    def truncation(self) -> float:
        """N^rho: the u-window outside of which discretized fields vanish."""
        return float(self.N) ** self.rho

    @property
    def mesh(self) -> float:
        return float(self.N) ** (-self.sigma_mesh)

    @property
    def count_bound(self) -> float:
        return self.c_count * float(self.N) ** (self.rho + 2 * self.sigma_mesh)

    def max_distance(self) -> float:
        """Largest max-norm distance from a point of [0,1] x [-N^rho, N^rho] to the grid."""
        L = self.truncation
        return max(_max_gap(self.lambda_points, 0.0, 1.0), _max_gap(self.u_points, -L, L))

    def points(self) -> np.ndarray:
        """All gridpoints as (total_points, 2) in canonical order: lambda-major, then u."""
        L, U = np.meshgrid(self.lambda_points, self.u_points, indexing="ij")
        return np.column_stack([L.ravel(), U.ravel()])


def make_grid(
    N: int,
    rho: float = DEFAULT_RHO,
    sigma_mesh: float = DEFAULT_SIGMA_MESH,
    c_count: float = GRID_COUNT_CONSTANT,
) -> DiscretizationGrid:
    """
    Evenly spaced cell-centred grid on [0,1] x [-N^rho, N^rho]:
    ceil(N^sigma) lambda-points and ceil(N^(rho+sigma)) u-points, so every point of
    the rectangle is within N^-sigma of a gridpoint in max-distance.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not 0 < rho < sigma_mesh < 1:
        raise ValueError(f"Grid needs 0 < rho < sigma_mesh < 1, got rho={rho}, sigma_mesh={sigma_mesh}")
    if c_count <= 0:
        raise ValueError(f"c_count must be positive, got {c_count}")
    L = float(N) ** rho
    n_lam = _ceil(float(N) ** sigma_mesh)
    n_u = _ceil(float(N) ** (rho + sigma_mesh))
    return DiscretizationGrid(
        N=int(N),
        rho=float(rho),
        sigma_mesh=float(sigma_mesh),
        lambda_points=_cell_centers(0.0, 1.0, n_lam),
        u_points=_cell_centers(-L, L, n_u),
        c_count=float(c_count),
    )


def _nearest(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Index of the nearest point; ties go to the smaller point."""
    hi = np.clip(np.searchsorted(points, x, side="left"), 0, len(points) - 1)
    lo = np.maximum(hi - 1, 0)
    take_lo = np.abs(x - points[lo]) <= np.abs(points[hi] - x)
    return np.where(take_lo, lo, hi)


@dataclass(frozen=True, eq=False)
class DiscretizedField:
    """values has shape (total_points, d), ordered lambda-major then u."""

    grid: DiscretizationGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.shape[0] != self.grid.total_points:
            raise ValueError(f"Expected {self.grid.total_points} gridpoint values, got {vals.shape[0]}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def evaluate(self, lambdas, us) -> np.ndarray:
        """Nearest-gridpoint values on lambdas x us, shape (len(lambdas), len(us), d); zero for |u| > N^rho."""
        lams = np.atleast_1d(np.asarray(lambdas, dtype=float))
        uu = np.atleast_1d(np.asarray(us, dtype=float))
        i = _nearest(self.grid.lambda_points, lams)
        j = _nearest(self.grid.u_points, uu)
        table = self.values.reshape(len(self.grid.lambda_points), len(self.grid.u_points), self.d)
        out = table[np.ix_(i, j)].copy()
        out[:, np.abs(uu) > self.grid.truncation, :] = 0.0
        return out

    def query(self, lam: float, u: float) -> np.ndarray:
        return self.evaluate([lam], [u])[0, 0]


Evaluable = Union[PartialSumField, DiscretizedField, Callable[[np.ndarray, np.ndarray], Any]]


def _evaluate_any(f: Evaluable, lambdas: np.ndarray, us: np.ndarray) -> np.ndarray:
    if isinstance(f, PartialSumField):
        # points beyond the field's own u-span count as zero
        inside = (us >= f.interval.lower) & (us <= f.interval.upper)
        out = np.zeros((len(lambdas), len(us), f.d))
        if np.any(inside):
            out[:, inside, :] = f.evaluate(lambdas, us[inside])
        return out
    if hasattr(f, "evaluate"):
        return np.asarray(f.evaluate(lambdas, us), dtype=float)
    L, U = np.meshgrid(lambdas, us, indexing="ij")
    vals = np.asarray(f(L, U), dtype=float)
    if vals.ndim == 0:
        vals = np.full(L.shape, float(vals))
    if vals.ndim == 2:
        vals = vals[:, :, None]
    return vals


def discretize(f: Evaluable, grid: DiscretizationGrid) -> DiscretizedField:
    """
    f^dis: f sampled at the gridpoints. f may be a PartialSumField, a DiscretizedField,
    any object with evaluate(lambdas, us), or a vectorized callable f(L, U).
    """
    vals = _evaluate_any(f, grid.lambda_points, grid.u_points)
    vals = np.where(np.abs(grid.u_points)[None, :, None] > grid.truncation, 0.0, vals)
    return DiscretizedField(grid, vals.reshape(grid.total_points, -1))


def vectorize(fd: DiscretizedField) -> np.ndarray:
    """Flat vector, lambda-major then u then component."""
    return np.asarray(fd.values).reshape(-1).copy()


def sup_over_grid(fd: DiscretizedField) -> float:
    return float(np.max(np.abs(fd.values))) if fd.values.size else 0.0


def discretization_error(f: Callable[[np.ndarray, np.ndarray], Any], grid: DiscretizationGrid, lattice: int = 64) -> float:
    """sup |f - f^dis| over a lattice of [0,1] x [-N^rho - 1, N^rho + 1]."""
    fd = discretize(f, grid)
    lams = np.linspace(0.0, 1.0, lattice)
    us = np.linspace(-grid.truncation - 1.0, grid.truncation + 1.0, 2 * lattice)
    exact = _evaluate_any(f, lams, us)
    return float(np.max(np.abs(exact - fd.evaluate(lams, us))))
