import itertools
import math

import numpy as np
import pytest

from gausslimit import CovMatrix
from metrics import (
    EmpiricalMeasure,
    empirical_cov,
    pairwise_distances,
    powers_stormer_check,
    prokhorov_discrete,
    prokhorov_w2_bound_check,
    psd_sqrt,
    trace_norm,
    wasserstein2_gaussian,
    wasserstein_discrete,
)
from utils import NumericError


def _prokhorov_by_subsets(P1, P2, norm="max"):
    """inf eps with P1(A) <= P2(A^eps) + eps over every subset A of P1's atoms."""
    D = pairwise_distances(P1, P2, norm)
    best = 1.0
    for t in np.unique(np.concatenate([[0.0], D.ravel()])):
        gap = 0.0
        for r in range(1, P1.size + 1):
            for A in itertools.combinations(range(P1.size), r):
                A = list(A)
                near = np.any(D[A] <= t, axis=0)
                gap = max(gap, P1.weights[A].sum() - P2.weights[near].sum())
        best = min(best, max(t, gap))
    return best


def _random_measure(rng, k, dim=2, uniform=False):
    atoms = rng.uniform(-1, 1, size=(k, dim))
    if uniform:
        return EmpiricalMeasure.uniform(atoms)
    w = rng.dirichlet(np.ones(k))
    return EmpiricalMeasure(atoms, w / w.sum())


def _random_psd(rng, n, rank=None):
    X = rng.standard_normal((n, rank or n))
    return X @ X.T


def test_measure_validation():
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 1)), [0.5, 0.4])
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 1)), [1.5, -0.5])
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.zeros((2, 1)), [1.0])
    m = EmpiricalMeasure.from_dict({"atoms": [[0.0], [1.0]]})
    assert m.is_uniform() and m.size == 2 and m.dim == 1


def test_prokhorov_of_two_diracs():
    assert prokhorov_discrete(EmpiricalMeasure.dirac(0.0), EmpiricalMeasure.dirac(0.3)) == pytest.approx(0.3)
    assert prokhorov_discrete(EmpiricalMeasure.dirac(0.0), EmpiricalMeasure.dirac(5.0)) == 1.0


def test_prokhorov_half_mass_moved_far():
    P1 = EmpiricalMeasure.uniform([[0.0], [1.0]])
    P2 = EmpiricalMeasure.uniform([[0.0], [10.0]])
    assert prokhorov_discrete(P1, P2) == pytest.approx(0.5)


def test_prokhorov_of_identical_measures_is_zero():
    P = EmpiricalMeasure.uniform([[0.0, 1.0], [2.0, 3.0]])
    assert prokhorov_discrete(P, P) == 0.0


def test_prokhorov_matches_subset_definition():
    rng = np.random.default_rng(0)
    for i in range(200):
        k1, k2 = rng.integers(1, 5, size=2)
        uniform = i % 3 == 0
        if uniform:
            k2 = k1
        P1 = _random_measure(rng, k1, uniform=uniform)
        P2 = _random_measure(rng, k2, uniform=uniform)
        assert prokhorov_discrete(P1, P2) == pytest.approx(_prokhorov_by_subsets(P1, P2), abs=1e-9)


def test_prokhorov_symmetry_and_triangle():
    rng = np.random.default_rng(1)
    for _ in range(200):
        P, Q, R = (_random_measure(rng, int(rng.integers(1, 5))) for _ in range(3))
        pq = prokhorov_discrete(P, Q)
        assert pq == pytest.approx(prokhorov_discrete(Q, P), abs=1e-9)
        assert pq <= prokhorov_discrete(P, R) + prokhorov_discrete(R, Q) + 1e-9


def test_prokhorov_dimension_and_norm_checks():
    with pytest.raises(ValueError):
        prokhorov_discrete(EmpiricalMeasure.dirac([0.0, 0.0]), EmpiricalMeasure.dirac(0.0))
    with pytest.raises(ValueError):
        prokhorov_discrete(EmpiricalMeasure.dirac(0.0), EmpiricalMeasure.dirac(0.0), norm="l1")


def test_squared_prokhorov_below_wasserstein():
    rng = np.random.default_rng(2)
    for _ in range(100):
        P1 = _random_measure(rng, int(rng.integers(1, 6)))
        P2 = _random_measure(rng, int(rng.integers(1, 6)))
        pi, w = prokhorov_w2_bound_check(P1, P2)
        assert pi**2 <= w + 1e-9


def test_wasserstein_discrete_simple_cases():
    assert wasserstein_discrete(EmpiricalMeasure.dirac(0.0), EmpiricalMeasure.dirac(3.0)) == pytest.approx(3.0)
    P = EmpiricalMeasure.uniform([[0.0], [1.0]])
    assert wasserstein_discrete(P, P, q=1) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        wasserstein_discrete(P, P, atom_cap=1)
    with pytest.raises(ValueError):
        wasserstein_discrete(P, P, q=0.5)


def test_w2_gaussian_scalar_oracle():
    rng = np.random.default_rng(3)
    for _ in range(100):
        s1, s2 = rng.uniform(0.01, 5.0, size=2)
        w = wasserstein2_gaussian(np.array([[s1**2]]), np.array([[s2**2]]))
        assert abs(w - abs(s1 - s2)) <= 1e-8


def test_w2_gaussian_known_values():
    assert wasserstein2_gaussian(np.array([[1.0]]), np.array([[4.0]])) == pytest.approx(1.0)
    assert wasserstein2_gaussian(np.diag([1.0, 4.0]), np.diag([4.0, 1.0])) == pytest.approx(math.sqrt(2.0))
    S = CovMatrix(2, np.diag([2.0, 3.0]))
    assert wasserstein2_gaussian(S, S) == 0.0


def test_w2_gaussian_commuting_diagonal():
    rng = np.random.default_rng(4)
    a, b = rng.uniform(0, 3, size=(2, 5))
    expected = math.sqrt(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2))
    assert wasserstein2_gaussian(np.diag(a), np.diag(b)) == pytest.approx(expected, abs=1e-8)


def test_w2_gaussian_input_errors():
    with pytest.raises(ValueError):
        wasserstein2_gaussian(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        wasserstein2_gaussian(np.array([[1.0, 1.0], [0.0, 1.0]]), np.eye(2))
    with pytest.raises(ValueError):
        wasserstein2_gaussian(np.diag([1.0, -1.0]), np.eye(2))


def test_psd_sqrt():
    assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])).entries, np.diag([2.0, 3.0]))
    rng = np.random.default_rng(5)
    A = _random_psd(rng, 6, rank=3)
    R = psd_sqrt(A).entries
    assert np.allclose(R @ R, A, atol=1e-9)
    with pytest.raises(ValueError):
        psd_sqrt(np.diag([1.0, -0.5]))


def test_psd_sqrt_reports_eigensolver_failure(monkeypatch):
    import metrics

    def broken(*_a, **_k):
        raise metrics.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(metrics.linalg, "eigh", broken)
    with pytest.raises(NumericError):
        psd_sqrt(np.eye(2))


def test_empirical_cov():
    C = empirical_cov([[1.0, 0.0], [-1.0, 0.0]])
    assert np.array_equal(C.entries, np.diag([1.0, 0.0]))
    assert empirical_cov([1.0, 3.0]).entries.tolist() == [[1.0]]
    with pytest.raises(ValueError):
        empirical_cov(np.zeros((0, 2)))


def test_trace_norm():
    assert trace_norm(np.diag([1.0, -2.0])) == pytest.approx(3.0)


def test_powers_stormer_inequality():
    rng = np.random.default_rng(6)
    for _ in range(100):
        n = int(rng.integers(1, 33))
        A, B = _random_psd(rng, n), _random_psd(rng, n, rank=max(1, n // 2))
        lhs, rhs = powers_stormer_check(A, B)
        assert lhs <= rhs + 1e-8
