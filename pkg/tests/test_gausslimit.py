import numpy as np
import pytest

from funcspace import GridFunction, Interval
from gausslimit import (
    CovKernel,
    brownian_sup_cdf,
    brownian_sup_quantile,
    default_bandwidth,
    estimate_lrv,
    factorize,
    marginal_variance,
    project_psd,
    quantile_from_samples,
    sample_brownian,
    scalar_kernel,
    spacetime_cov,
    sup_quantile,
    sup_samples,
)
from utils import ConfigError, NumericError

I = Interval(0.0, 1.0)


def _kernel3():
    u = np.linspace(0, 1, 3)
    M = np.exp(-np.abs(u[:, None] - u[None, :]))
    return CovKernel(u, 1, M)


def test_default_bandwidth():
    assert default_bandwidth(1000) == 10
    assert default_bandwidth(27) == 3
    assert default_bandwidth(2) == 1


def test_estimate_lrv_bartlett_hand_example():
    series = [GridFunction.constant(I, 2, v) for v in (1.0, -1.0, 1.0, -1.0)]
    c = estimate_lrv(series, bandwidth=1)
    assert c.lag_bandwidth == 1
    assert np.allclose(c.matrix, 0.25)


def test_estimate_lrv_without_demeaning():
    series = [GridFunction.constant(I, 2, 2.0)] * 3
    assert np.allclose(estimate_lrv(series, bandwidth=0, demean=False).matrix, 4.0)
    assert np.allclose(estimate_lrv(series, bandwidth=0).matrix, 0.0)


def test_estimate_lrv_input_errors():
    with pytest.raises(ValueError):
        estimate_lrv([GridFunction.zeros(I, 2)])
    with pytest.raises(ValueError):
        estimate_lrv([GridFunction.zeros(I, 2)] * 3, bandwidth=3)


def test_estimate_lrv_is_psd():
    rng = np.random.default_rng(0)
    series = [GridFunction(I, rng.standard_normal((6, 2))) for _ in range(20)]
    c = estimate_lrv(series, bandwidth=5)
    assert c.dim == 12
    assert np.linalg.eigvalsh(c.matrix)[0] >= -1e-10


def test_project_psd_clamps():
    out, clamped = project_psd(np.diag([1.0, -1.0]))
    assert clamped == 1
    assert np.allclose(out, np.diag([1.0, 0.0]))


def test_factorize_rank_deficient_and_zero():
    M = np.ones((3, 3))
    L = factorize(M)
    assert np.allclose(L @ L.T, M, atol=1e-6)
    assert not np.any(factorize(np.zeros((2, 2))))
    with pytest.raises(NumericError):
        factorize(np.array([[np.inf]]))


def test_kernel_validation_and_round_trip():
    with pytest.raises(NumericError):
        CovKernel(np.array([0.0]), 1, np.array([[np.nan]]))
    with pytest.raises(ValueError):
        CovKernel(np.array([0.0, 1.0]), 1, np.eye(3))
    c = _kernel3()
    back = CovKernel.from_dict(c.to_dict())
    assert np.array_equal(back.matrix, c.matrix)
    with pytest.raises(ConfigError):
        CovKernel.from_dict({"u_grid": [0.0]})


def test_kernel_on_points_with_components():
    c = CovKernel(np.array([0.0, 1.0]), 2, np.eye(4))
    M = c.on_points([0.0, 0.5])
    assert M.shape == (4, 4)
    assert M[2, 2] == pytest.approx(0.5)
    assert M[0, 2] == pytest.approx(0.5)
    assert M[0, 1] == 0.0


def test_spacetime_cov_scalar():
    S = spacetime_cov(scalar_kernel(2.0), [0.25, 0.75], [0.0]).entries
    assert S.tolist() == [[0.5, 0.5], [0.5, 1.5]]


def test_spacetime_cov_zero_outside():
    c = CovKernel(np.array([0.0, 1.0]), 1, np.ones((2, 2)))
    S = spacetime_cov(c, [1.0], [-0.5, 0.5], zero_outside=True).entries
    assert S.tolist() == [[0.0, 0.0], [0.0, 1.0]]


def test_marginal_variance():
    c = _kernel3()
    assert np.allclose(marginal_variance(c, 0.5), 0.5)


def test_sample_brownian_shape_and_seed():
    c = _kernel3()
    lam = np.linspace(0, 1, 9)
    W = sample_brownian(c, lam, 4)
    assert W.values.shape == (9, 3, 1)
    assert not np.any(W.values[0])
    assert W.centering == "brownian"
    assert np.array_equal(W.values, sample_brownian(c, lam, 4).values)
    with pytest.raises(ValueError):
        sample_brownian(c, [0.5, 1.0], 0)


def test_zero_kernel_gives_zero_quantile():
    c = CovKernel(np.array([0.0, 1.0]), 1, np.zeros((2, 2)))
    assert sup_quantile(c, 0.05, n_rep=200, lambda_resolution=16, seed=1) == 0.0


def test_quantile_scales_with_square_root_of_kernel():
    c = _kernel3()
    q1 = sup_quantile(c, 0.1, n_rep=200, lambda_resolution=32, seed=7)
    q4 = sup_quantile(c.scaled(4.0), 0.1, n_rep=200, lambda_resolution=32, seed=7)
    assert q4 == pytest.approx(2.0 * q1, rel=1e-12)


def test_quantile_argument_checks():
    c = scalar_kernel()
    with pytest.raises(ConfigError):
        sup_quantile(c, 0.0)
    with pytest.raises(ConfigError):
        sup_quantile(c, 0.1, n_rep=50)
    with pytest.raises(ValueError):
        sup_samples(c, 0)


def test_brownian_sup_quantile_known_value():
    assert brownian_sup_quantile(0.05) == pytest.approx(2.2414, abs=1e-3)
    assert brownian_sup_cdf(brownian_sup_quantile(0.1)) == pytest.approx(0.9, abs=1e-9)
    assert brownian_sup_cdf(0.0) == 0.0


def test_scalar_monte_carlo_quantile_near_series_value():
    samples = sup_samples(scalar_kernel(), 8000, 512, seed=11)
    assert quantile_from_samples(samples, 0.1) == pytest.approx(brownian_sup_quantile(0.1), abs=0.1)


@pytest.mark.slow
def test_brownian_endpoint_covariance_matches_kernel():
    c = _kernel3()
    n = 10000
    ends = np.empty((n, 3))
    halves = np.empty((n, 3))
    rng = np.random.default_rng(2024)
    for i in range(n):
        W = sample_brownian(c, [0.0, 0.5, 1.0], rng)
        ends[i] = W.values[2, :, 0]
        halves[i] = W.values[1, :, 0]
    C = c.matrix
    emp = ends.T @ ends / n
    se = np.sqrt((np.outer(np.diag(C), np.diag(C)) + C**2) / n)
    assert np.all(np.abs(emp - C) <= 5 * se)
    # increments over [0, 1/2] and [1/2, 1] are independent
    cross = halves.T @ (ends - halves) / n
    se_cross = np.sqrt(np.outer(np.diag(C), np.diag(C)) * 0.25 / n)
    assert np.all(np.abs(cross) <= 5 * se_cross)


def test_sampling_rejects_an_indefinite_kernel():
    c = CovKernel(np.array([0.0, 1.0]), 1, np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ConfigError):
        sample_brownian(c, [0.0, 1.0], 0)
    with pytest.raises(ConfigError):
        sup_samples(c, 200, 16)
    # a projected kernel is trusted as is
    projected = CovKernel(c.u_grid, 1, project_psd(c.matrix)[0], psd_projected=True)
    assert sample_brownian(projected, [0.0, 1.0], 0).values.shape == (2, 2, 1)


def test_spacetime_cov_is_psd_on_random_instances():
    rng = np.random.default_rng(31)
    for _ in range(20):
        n, d = int(rng.integers(2, 6)), int(rng.integers(1, 3))
        A = rng.standard_normal((n * d, n * d))
        c = CovKernel(np.sort(rng.uniform(0, 1, n)) + np.arange(n), d, A @ A.T)
        lams = np.sort(rng.uniform(0, 1, int(rng.integers(1, 6))))
        u = rng.uniform(c.u_grid[0] - 0.5, c.u_grid[-1] + 0.5, int(rng.integers(1, 6)))
        S = spacetime_cov(c, lams, u, zero_outside=True).entries
        assert np.linalg.eigvalsh(S)[0] >= -1e-10 * max(np.trace(S), 1.0)


def test_estimate_lrv_of_white_noise_recovers_the_variance():
    rng = np.random.default_rng(32)
    series = [GridFunction(I, 2.0 * rng.standard_normal((2, 25))) for _ in range(20000)]
    diag = estimate_lrv(series).diagonal()
    assert np.mean(diag) == pytest.approx(4.0, abs=0.15)
    assert np.all(np.abs(diag - 4.0) < 1.0)


def test_estimate_lrv_of_ar1_coefficients():
    from synth import GeneratorConfig, generate_series

    cfg = GeneratorConfig(kind="far1", q_or_rho=0.5, n_basis=1, d=20, n_nodes=2, seed=33)
    c = estimate_lrv(generate_series(cfg, 50000), bandwidth=100)
    assert np.mean(c.diagonal()) == pytest.approx(1.0 / (1.0 - 0.5) ** 2, rel=0.05)
