"""
Distances between probability measures.

Prokhorov distance of finite discrete measures via Strassen couplings
(max-flow feasibility), exact discrete Wasserstein distances via optimal
transport, and the closed-form 2-Wasserstein distance between centred
Gaussians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple, Union

import networkx as nx
import numpy as np
import ot
from scipy import linalg, sparse
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial.distance import cdist

from config import ATOM_CAP, PSD_TOLERANCE, W2_NEGATIVE_TOLERANCE
from gausslimit import CovMatrix
from utils import NumericError, get_logger

log = get_logger("metrics")

NORMS = {"max": "chebyshev", "euclidean": "euclidean"}
WEIGHT_TOL = 1e-12

MatrixLike = Union[CovMatrix, np.ndarray]


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Finite measure: atoms (k, q) with positive weights summing to 1."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if atoms.ndim != 2 or atoms.shape[0] == 0:
            raise ValueError(f"Atoms must be a non-empty (k, q) array, got shape {atoms.shape}")
        if len(w) != atoms.shape[0]:
            raise ValueError(f"Got {len(w)} weights for {atoms.shape[0]} atoms")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("Atoms must be finite")
        if np.any(w <= 0):
            raise ValueError("Weights must be positive")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"Weights must sum to 1, got {w.sum()!r}")
        atoms.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, atoms) -> "EmpiricalMeasure":
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        k = atoms.shape[0]
        return cls(atoms, np.full(k, 1.0 / k))

    @classmethod
    def dirac(cls, x) -> "EmpiricalMeasure":
        return cls(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1), np.ones(1))

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def to_dict(self) -> Dict[str, Any]:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EmpiricalMeasure":
        atoms = np.asarray(data["atoms"], dtype=float)
        if "weights" not in data:
            return cls.uniform(atoms)
        return cls(atoms, np.asarray(data["weights"], dtype=float))


def _check_pair(P1: EmpiricalMeasure, P2: EmpiricalMeasure, norm: str) -> str:
    if P1.dim != P2.dim:
        raise ValueError(f"Dimension mismatch: {P1.dim} vs {P2.dim}")
    if norm not in NORMS:
        raise ValueError(f"Unknown norm {norm!r}; expected one of {sorted(NORMS)}")
    return NORMS[norm]


def pairwise_distances(P1: EmpiricalMeasure, P2: EmpiricalMeasure, norm: str = "max") -> np.ndarray:
    return cdist(P1.atoms, P2.atoms, metric=_check_pair(P1, P2, norm))


# ---------------------------------------------------------------------------
# Prokhorov
# ---------------------------------------------------------------------------


def _transported_mass(P1: EmpiricalMeasure, P2: EmpiricalMeasure, allowed: np.ndarray) -> float:
    """Largest mass a coupling can put on the allowed (i, j) pairs."""
    if not np.any(allowed):
        return 0.0
    if P1.size == P2.size and P1.is_uniform() and P2.is_uniform():
        # equal uniform weights: max flow is the maximum matching size over k
        match = maximum_bipartite_matching(sparse.csr_matrix(allowed.astype(np.int8)), perm_type="column")
        return float(np.sum(match >= 0)) / P1.size

    g = nx.DiGraph()
    for i, w in enumerate(P1.weights):
        g.add_edge("s", ("a", i), capacity=float(w))
    for j, w in enumerate(P2.weights):
        g.add_edge(("b", j), "t", capacity=float(w))
    for i, j in zip(*np.nonzero(allowed)):
        # no capacity attribute: unbounded
        g.add_edge(("a", int(i)), ("b", int(j)))
    value, _ = nx.maximum_flow(g, "s", "t")
    return float(value)


def prokhorov_discrete(P1: EmpiricalMeasure, P2: EmpiricalMeasure, norm: str = "max") -> float:
    """
    Prokhorov distance of two finite measures.

    With f(t) the smallest mass a coupling must leave on pairs farther apart
    than t, the distance is min over candidate distances t_j of max(t_j, f(t_j)).
    f is non-increasing, so the minimum sits where t_j first catches up
    with f(t_j) and is found by bisection over the sorted distances.
    """
    D = pairwise_distances(P1, P2, norm)
    t = np.unique(np.concatenate([[0.0], D.ravel()]))
    cache: Dict[int, float] = {}

    def deficit(j: int) -> float:
        if j not in cache:
            cache[j] = max(0.0, 1.0 - _transported_mass(P1, P2, D <= t[j]))
        return cache[j]

    lo, hi = 0, len(t) - 1
    # deficit at the largest distance is 0, so a crossing exists
    while lo < hi:
        mid = (lo + hi) // 2
        if t[mid] >= deficit(mid) - WEIGHT_TOL:
            hi = mid
        else:
            lo = mid + 1
    best = float(t[lo])
    if lo > 0:
        best = min(best, deficit(lo - 1))
    log.debug(f"prokhorov: {len(t)} candidate distances, {len(cache)} flow solves")
    return float(min(1.0, best))


# ---------------------------------------------------------------------------
# Wasserstein
# ---------------------------------------------------------------------------


def wasserstein_discrete(P1: EmpiricalMeasure, P2: EmpiricalMeasure, q: float = 2.0, norm: str = "euclidean",
                         atom_cap: int = ATOM_CAP) -> float:
    """W_q by exact optimal transport on the atom cost matrix."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if max(P1.size, P2.size) > atom_cap:
        raise ValueError(f"Exact transport is limited to {atom_cap} atoms, got {P1.size} and {P2.size}")
    M = pairwise_distances(P1, P2, norm) ** q
    a = np.asarray(P1.weights, dtype=np.float64)
    b = np.asarray(P2.weights, dtype=np.float64)
    cost = float(ot.emd2(a / a.sum(), b / b.sum(), M))
    return max(cost, 0.0) ** (1.0 / q)


def prokhorov_w2_bound_check(P1: EmpiricalMeasure, P2: EmpiricalMeasure, q: float = 2.0,
                             norm: str = "euclidean") -> Tuple[float, float]:
    """(pi, W_q) under the same ground norm; pi^2 <= W_q holds for every q >= 1."""
    return prokhorov_discrete(P1, P2, norm), wasserstein_discrete(P1, P2, q, norm)


def _as_array(S: MatrixLike) -> np.ndarray:
    M = np.asarray(S.entries if isinstance(S, CovMatrix) else S, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)):
        raise ValueError("Matrix is not symmetric")
    return 0.5 * (M + M.T)


def psd_sqrt(S: MatrixLike) -> CovMatrix:
    """Symmetric PSD square root by eigendecomposition; negative eigenvalues within tolerance are clamped."""
    M = _as_array(S)
    try:
        w, V = linalg.eigh(M)
    except linalg.LinAlgError as e:
        raise NumericError(f"Eigendecomposition failed: {e}") from e
    tol = PSD_TOLERANCE * max(1.0, float(np.sum(np.abs(w))))
    if w.size and w[0] < -tol:
        raise ValueError(f"Matrix is not PSD: smallest eigenvalue {w[0]:.3e}")
    R = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    R = 0.5 * (R + R.T)
    return CovMatrix(R.shape[0], R)


def wasserstein2_gaussian(S1: MatrixLike, S2: MatrixLike) -> float:
    """sqrt(tr[S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2]) for centred Gaussians."""
    A, B = _as_array(S1), _as_array(S2)
    if A.shape != B.shape:
        raise ValueError(f"Dimension mismatch: {A.shape} vs {B.shape}")
    if np.array_equal(A, B):
        return 0.0
    R = psd_sqrt(A).entries
    psd_sqrt(B)  # raises on non-PSD input
    inner = psd_sqrt(R @ B @ R).entries
    tr = float(np.trace(A) + np.trace(B))
    val = tr - 2.0 * float(np.trace(inner))
    if val < -W2_NEGATIVE_TOLERANCE * max(tr, 1e-300):
        raise NumericError(f"Negative squared W2 {val:.3e} beyond tolerance (trace {tr:.3e})")
    return math.sqrt(max(val, 0.0))


def empirical_cov(samples) -> CovMatrix:
    """(1/n) sum (x - mean)(x - mean)^T; rows of samples are observations."""
    X = np.asarray(samples, dtype=float)
    if X.size == 0:
        raise ValueError("empirical_cov needs at least one sample")
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / X.shape[0]
    return CovMatrix(C.shape[0], 0.5 * (C + C.T))


def trace_norm(A: np.ndarray) -> float:
    return float(np.sum(linalg.svdvals(np.asarray(A, dtype=float))))


def powers_stormer_check(A: MatrixLike, B: MatrixLike) -> Tuple[float, float]:
    """(||A^1/2 - B^1/2||_F^2, ||A - B||_trace); the first never exceeds the second."""
    Ma, Mb = _as_array(A), _as_array(B)
    lhs = float(np.linalg.norm(psd_sqrt(Ma).entries - psd_sqrt(Mb).entries, "fro") ** 2)
    return lhs, trace_norm(Ma - Mb)
