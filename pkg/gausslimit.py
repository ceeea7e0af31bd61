"""
Gaussian limit of the partial-sum field.

The limit is a Brownian motion W(lambda, u) with covariance
    E[W(l, u) W(l', v)] = min(l, l') * c(u, v),
where c is the long-run covariance kernel of the series. This module
estimates c (Bartlett lag window), builds the space-time covariance on a
grid, samples W by factorizing c once and accumulating independent Gaussian
increments, and calibrates the quantile of sup |W| by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
from scipy import linalg, optimize

from config import JITTER_LADDER, PSD_TOLERANCE, QUANTILE_BATCH, QUANTILE_RESOLUTION
from funcspace import GridFunction, Interval, interpolation_matrix
from partialsum import PartialSumField
from utils import ConfigError, NumericError, as_rng, get_logger

log = get_logger("gausslimit")

Seed = Union[int, np.random.Generator]


def project_psd(matrix: np.ndarray):
    """Symmetrize and clamp negative eigenvalues at 0; returns (projected, n_clamped)."""
    sym = 0.5 * (matrix + matrix.T)
    if not np.any(sym):
        return sym, 0
    w, V = linalg.eigh(sym)
    clamped = int(np.sum(w < 0))
    if clamped == 0:
        return sym, 0
    w = np.clip(w, 0.0, None)
    out = (V * w) @ V.T
    return 0.5 * (out + out.T), clamped


def min_eigenvalue(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(linalg.eigvalsh(0.5 * (matrix + matrix.T))[0])


@dataclass(frozen=True, eq=False)
class CovKernel:
    """
    Long-run covariance kernel on u_grid. matrix is (n*d, n*d) and entry
    [g*d + a, h*d + b] holds c_ab(u_g, u_h).
    """

    u_grid: np.ndarray
    d: int
    matrix: np.ndarray
    lag_bandwidth: int = 0
    psd_projected: bool = False
    line_truncation: bool = False

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u_grid, dtype=float))
        M = np.asarray(self.matrix, dtype=float)
        dim = len(u) * int(self.d)
        if M.shape != (dim, dim):
            raise ValueError(f"Kernel matrix must be {dim}x{dim} for {len(u)} nodes and d={self.d}, got {M.shape}")
        if not np.all(np.isfinite(M)):
            raise NumericError("Kernel matrix contains non-finite entries")
        if len(u) > 1 and np.any(np.diff(u) <= 0):
            raise ValueError("u_grid must be strictly increasing")
        u.setflags(write=False)
        M.setflags(write=False)
        object.__setattr__(self, "u_grid", u)
        object.__setattr__(self, "matrix", M)

    @property
    def n_nodes(self) -> int:
        return len(self.u_grid)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    @property
    def interval(self) -> Interval:
        lo = float(self.u_grid[0])
        # a single node carries no width; any positive width gives linspace(lo, hi, 1) == [lo]
        hi = float(self.u_grid[-1]) if self.n_nodes > 1 else lo + 1.0
        return Interval(lo, hi, self.line_truncation)

    def scaled(self, factor: float) -> "CovKernel":
        return CovKernel(self.u_grid, self.d, self.matrix * float(factor), self.lag_bandwidth,
                         self.psd_projected, self.line_truncation)

    def on_points(self, u_points, zero_outside: bool = False) -> np.ndarray:
        """Kernel bilinearly interpolated onto u_points, (len(u_points)*d) square."""
        A = interpolation_matrix(self.u_grid, u_points, zero_outside=zero_outside)
        Ad = np.kron(A, np.eye(self.d))
        out = Ad @ self.matrix @ Ad.T
        return 0.5 * (out + out.T)

    def diagonal(self) -> np.ndarray:
        """c(u_g, u_g) per node and component, shape (n, d)."""
        return np.diag(self.matrix).reshape(self.n_nodes, self.d).copy()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "u_grid": self.u_grid.tolist(),
            "d": self.d,
            "matrix": self.matrix.tolist(),
            "lag_bandwidth": self.lag_bandwidth,
            "psd_projected": self.psd_projected,
            "line_truncation": self.line_truncation,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CovKernel":
        try:
            return cls(
                u_grid=np.asarray(data["u_grid"], dtype=float),
                d=int(data.get("d", 1)),
                matrix=np.asarray(data["matrix"], dtype=float),
                lag_bandwidth=int(data.get("lag_bandwidth", 0)),
                psd_projected=bool(data.get("psd_projected", False)),
                line_truncation=bool(data.get("line_truncation", False)),
            )
        except KeyError as e:
            raise ConfigError(f"Kernel JSON is missing key {e}. Keys: {sorted(data)}") from e


@dataclass(frozen=True, eq=False)
class CovMatrix:
    dim: int
    entries: np.ndarray

    def min_eigenvalue(self) -> float:
        return min_eigenvalue(self.entries)

    def is_psd(self, tol: float = PSD_TOLERANCE) -> bool:
        tr = float(np.trace(self.entries))
        return self.min_eigenvalue() >= -tol * max(tr, 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {"dim": self.dim, "entries": self.entries.tolist()}


# ---------------------------------------------------------------------------
# Long-run variance
# ---------------------------------------------------------------------------


def default_bandwidth(N: int) -> int:
    """floor(N^(1/3)), at most N - 1."""
    b = int(math.floor(N ** (1.0 / 3.0) + 1e-9))
    return max(0, min(b, N - 1))


def estimate_lrv(
    series: Sequence[GridFunction],
    bandwidth: Union[int, str, None] = "auto",
    demean: bool = True,
    project: bool = True,
) -> CovKernel:
    """
    Bartlett lag-window estimate of the long-run covariance kernel:
        c = G_0 + sum_{l=1..b} (1 - l/(b+1)) (G_l + G_l^T),
        G_l = (1/N) sum_i Y_{i+l} Y_i^T.
    demean subtracts the sample mean first; pass demean=False for series
    that are already centered.
    """
    N = len(series)
    if N < 2:
        raise ValueError(f"Long-run variance needs at least 2 observations, got {N}")
    first = series[0]
    for i, x in enumerate(series):
        if not x.same_grid(first):
            raise ValueError(f"Series element {i} is not on the grid of element 0")
    Y = np.stack([x.values for x in series]).reshape(N, -1)
    if not np.all(np.isfinite(Y)):
        raise ValueError("Series contains non-finite values")
    if demean:
        Y = Y - Y.mean(axis=0)

    if bandwidth is None or bandwidth == "auto":
        b = default_bandwidth(N)
    else:
        b = int(bandwidth)
        if b < 0 or b >= N:
            raise ValueError(f"Bandwidth must lie in [0, {N - 1}], got {bandwidth}")

    C = Y.T @ Y / N
    for lag in range(1, b + 1):
        G = Y[lag:].T @ Y[:-lag] / N
        C += (1.0 - lag / (b + 1.0)) * (G + G.T)
    C = 0.5 * (C + C.T)

    if project:
        C, clamped = project_psd(C)
        if clamped:
            log.debug(f"clamped {clamped} negative eigenvalue(s) of the long-run kernel")
    return CovKernel(first.nodes, first.d, C, b, project, first.interval.truncation_of_line)


# ---------------------------------------------------------------------------
# Space-time covariance and Brownian sampling
# ---------------------------------------------------------------------------


def spacetime_cov(c: CovKernel, lambda_points, u_points, zero_outside: bool = False) -> CovMatrix:
    """Entries min(l, l') * c(u, u'), ordered lambda-major, then u, then component."""
    lams = np.atleast_1d(np.asarray(lambda_points, dtype=float))
    Cu = c.on_points(u_points, zero_outside=zero_outside)
    M = np.kron(np.minimum.outer(lams, lams), Cu)
    return CovMatrix(M.shape[0], M)


def factorize(matrix: np.ndarray) -> np.ndarray:
    """
    Factor L with L @ L.T equal to matrix (up to jitter).
    Tries Cholesky, then Cholesky with eps * trace / dim on the diagonal for eps in
    JITTER_LADDER, then an eigendecomposition with clamped eigenvalues.
    """
    M = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(M)):
        raise NumericError("Cannot factorize a matrix with non-finite entries")
    dim = M.shape[0]
    if not np.any(M):
        return np.zeros((dim, dim))
    try:
        return linalg.cholesky(M, lower=True)
    except linalg.LinAlgError:
        pass
    scale = float(np.trace(M)) / dim
    for eps in JITTER_LADDER:
        try:
            L = linalg.cholesky(M + eps * scale * np.eye(dim), lower=True)
            log.debug(f"cholesky needed jitter {eps:g} x trace/dim")
            return L
        except linalg.LinAlgError:
            continue
    try:
        w, V = linalg.eigh(0.5 * (M + M.T))
    except linalg.LinAlgError as e:
        raise NumericError(f"Factorization failed after jitter ladder {JITTER_LADDER}: {e}") from e
    log.debug("cholesky failed on the whole jitter ladder; using clamped eigendecomposition")
    return V * np.sqrt(np.clip(w, 0.0, None))


def require_psd(c: CovKernel) -> None:
    """Kernels that were not PSD-projected must be PSD up to PSD_TOLERANCE * trace."""
    if c.psd_projected:
        return
    if not CovMatrix(c.dim, c.matrix).is_psd():
        raise ConfigError(f"Kernel is not positive semidefinite (min eigenvalue {min_eigenvalue(c.matrix):.3g}); "
                          "project it before sampling")


def sample_brownian(c: CovKernel, lambda_grid, seed: Seed) -> PartialSumField:
    """One path of W on lambda_grid x c.u_grid."""
    require_psd(c)
    lams = np.asarray(lambda_grid, dtype=float)
    if len(lams) < 2 or lams[0] != 0.0 or np.any(np.diff(lams) <= 0):
        raise ValueError("lambda_grid must start at 0 and be strictly increasing")
    rng = as_rng(seed)
    L = factorize(c.matrix)
    z = rng.standard_normal((len(lams) - 1, L.shape[1]))
    incr = np.sqrt(np.diff(lams))[:, None] * (z @ L.T)
    W = np.concatenate([np.zeros((1, c.dim)), np.cumsum(incr, axis=0)], axis=0)
    return PartialSumField(
        N=len(lams) - 1,
        lambda_grid=lams,
        interval=c.interval,
        values=W.reshape(len(lams), c.n_nodes, c.d),
        centered=True,
        centering="brownian",
    )


def sup_samples(c: CovKernel, n_rep: int, lambda_resolution: int = QUANTILE_RESOLUTION,
                seed: Seed = 0, batch: int = QUANTILE_BATCH) -> np.ndarray:
    """
    n_rep draws of max over lambda in {j/R} and all nodes/components of |W(lambda, u)|.
    The factor of c is computed once; paths are simulated in batches.
    """
    if n_rep < 1:
        raise ValueError(f"n_rep must be >= 1, got {n_rep}")
    if lambda_resolution < 1:
        raise ValueError(f"lambda_resolution must be >= 1, got {lambda_resolution}")
    require_psd(c)
    rng = as_rng(seed)
    L = factorize(c.matrix)
    r = L.shape[1]
    step = math.sqrt(1.0 / lambda_resolution)
    out = np.empty(n_rep)
    for start in range(0, n_rep, batch):
        B = min(batch, n_rep - start)
        z = rng.standard_normal((B, lambda_resolution, r))
        paths = np.cumsum(step * (z @ L.T), axis=1)
        out[start : start + B] = np.max(np.abs(paths), axis=(1, 2))
    return out


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")


def quantile_from_samples(samples: np.ndarray, alpha: float) -> float:
    _check_alpha(alpha)
    return float(np.quantile(samples, 1.0 - alpha))


def sup_quantile(c: CovKernel, alpha: float, n_rep: int = 1000,
                 lambda_resolution: int = QUANTILE_RESOLUTION, seed: Seed = 0) -> float:
    """Empirical (1 - alpha)-quantile of sup |W| over the lambda grid and the kernel nodes."""
    _check_alpha(alpha)
    if n_rep < 100:
        raise ConfigError(f"n_rep must be >= 100 for a quantile estimate, got {n_rep}")
    return quantile_from_samples(sup_samples(c, n_rep, lambda_resolution, seed), alpha)


def brownian_sup_cdf(x: float, terms: int = 200) -> float:
    """P(sup_{[0,1]} |B| <= x) for a standard Brownian motion B."""
    if x <= 0:
        return 0.0
    k = np.arange(terms)
    odd = 2 * k + 1
    series = (-1.0) ** k / odd * np.exp(-(odd ** 2) * math.pi ** 2 / (8.0 * x * x))
    return float(np.clip(4.0 / math.pi * np.sum(series), 0.0, 1.0))


def brownian_sup_quantile(alpha: float) -> float:
    """x with P(sup_{[0,1]} |B| > x) = alpha."""
    _check_alpha(alpha)
    return float(optimize.brentq(lambda x: brownian_sup_cdf(x) - (1.0 - alpha), 0.05, 20.0, xtol=1e-12))


def scalar_kernel(variance: float = 1.0, u: float = 0.0) -> CovKernel:
    """Kernel on a single node: the standard scalar Brownian limit scaled by variance."""
    return CovKernel(np.array([float(u)]), 1, np.array([[float(variance)]]), 0, True)


def marginal_variance(c: CovKernel, lam: float, u_points: Optional[Sequence[float]] = None) -> np.ndarray:
    """lambda * c(u, u) at u_points (default: the kernel nodes), shape (len, d)."""
    if u_points is None:
        return lam * c.diagonal()
    Cu = c.on_points(u_points)
    return lam * np.diag(Cu).reshape(-1, c.d)
