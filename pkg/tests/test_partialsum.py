import math

import numpy as np
import pandas as pd
import pytest

from funcspace import GridFunction, Interval
from partialsum import (
    DiscretizedField,
    PartialSumField,
    build_partial_sum,
    discretization_error,
    discretize,
    eval_linear,
    export_csv,
    field_frame,
    make_grid,
    partial_sum_from_block,
    sup_over_grid,
    vectorize,
)

I = Interval(0.0, 1.0)


def _constant_series(levels, n_nodes=3):
    return [GridFunction.constant(I, n_nodes, v) for v in levels]


def test_partial_sum_hand_example():
    P = build_partial_sum(_constant_series([1, 2, 3, 4]), GridFunction.zeros(I, 3))
    assert P.N == 4
    assert P.centering == "exact"
    assert P.values[:, 0, 0].tolist() == [0.0, 0.5, 1.5, 3.0, 5.0]
    assert P.lambda_grid.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_partial_sum_linear_interpolation_in_lambda():
    P = build_partial_sum(_constant_series([1, 2, 3, 4]), GridFunction.zeros(I, 3))
    assert eval_linear(P, 0.375, 0.5)[0] == pytest.approx(1.0)
    assert eval_linear(P, 1.0, 0.0)[0] == pytest.approx(5.0)


def test_partial_sum_rejects_lambda_out_of_range():
    P = build_partial_sum(_constant_series([1, 2]), GridFunction.zeros(I, 3))
    with pytest.raises(ValueError):
        P.evaluate([1.5], [0.5])


def test_empirical_centering_ends_at_zero():
    rng = np.random.default_rng(0)
    series = [GridFunction(I, rng.standard_normal((5, 2))) for _ in range(9)]
    P = build_partial_sum(series)
    assert P.centering == "empirical"
    assert np.max(np.abs(P.values[-1])) < 1e-12


def test_partial_sum_telescopes():
    rng = np.random.default_rng(1)
    series = [GridFunction(I, rng.standard_normal((4, 1))) for _ in range(16)]
    centers = [GridFunction(I, rng.standard_normal((4, 1))) for _ in range(16)]
    P = build_partial_sum(series, centers)
    diffs = np.diff(P.values, axis=0) * math.sqrt(16)
    expected = np.stack([x.values - c.values for x, c in zip(series, centers)])
    assert np.max(np.abs(diffs - expected)) < 1e-12


def test_partial_sum_from_block_matches_series_path():
    rng = np.random.default_rng(2)
    block = rng.standard_normal((6, 4, 1))
    P1 = partial_sum_from_block(block, I)
    P2 = build_partial_sum([GridFunction(I, x) for x in block])
    assert np.allclose(P1.values, P2.values, rtol=0, atol=1e-14)


def test_partial_sum_input_errors():
    with pytest.raises(ValueError):
        build_partial_sum([])
    with pytest.raises(ValueError):
        build_partial_sum(_constant_series([1, 2]) + [GridFunction.zeros(I, 4)])
    with pytest.raises(ValueError):
        build_partial_sum(_constant_series([1, 2]), "median")
    with pytest.raises(ValueError):
        build_partial_sum(_constant_series([1, 2]), [GridFunction.zeros(I, 3)])


def test_partial_sum_field_validates_lambda_grid():
    with pytest.raises(ValueError):
        PartialSumField(1, np.array([0.5, 1.0]), I, np.zeros((2, 3, 1)))


def test_field_frame_and_export(tmp_path):
    P = build_partial_sum(_constant_series([1, 2]), GridFunction.zeros(I, 3))
    df = field_frame(P)
    assert list(df.columns) == ["k", "lambda", "u_index", "u", "component", "value"]
    assert len(df) == 3 * 3
    path = export_csv(P, tmp_path / "field.csv")
    assert len(pd.read_csv(path)) == 9
    with pytest.raises(OSError):
        export_csv(P, tmp_path / "missing" / "field.csv")


def test_make_grid_counts_for_n16():
    g = make_grid(16, rho=0.25, sigma_mesh=0.5)
    assert len(g.lambda_points) == 4
    assert len(g.u_points) == 8
    assert g.truncation == pytest.approx(2.0)
    assert g.lambda_points.tolist() == [0.125, 0.375, 0.625, 0.875]
    assert g.max_distance() <= 0.25 + 1e-12
    assert g.points().shape == (32, 2)


def test_make_grid_mesh_and_count_bound():
    for N in (8, 64, 512, 4096):
        g = make_grid(N)
        assert g.max_distance() <= g.mesh + 1e-12
        assert g.total_points <= g.count_bound


def test_make_grid_rejects_bad_exponents():
    with pytest.raises(ValueError):
        make_grid(16, rho=0.5, sigma_mesh=0.4)
    with pytest.raises(ValueError):
        make_grid(0)
    with pytest.raises(ValueError):
        make_grid(16, c_count=0.0)


def test_discretize_product_is_exact_on_gridpoints():
    g = make_grid(16, rho=0.25, sigma_mesh=0.5)
    fd = discretize(lambda L, U: L * U, g)
    pts = g.points()
    assert np.array_equal(fd.values[:, 0], pts[:, 0] * pts[:, 1])


def test_discretize_is_idempotent():
    g = make_grid(64)
    fd = discretize(lambda L, U: np.sin(L + U), g)
    again = discretize(fd, g)
    assert np.array_equal(again.values, fd.values)


def test_discretized_field_vanishes_outside_window():
    g = make_grid(16, rho=0.25, sigma_mesh=0.5)
    fd = discretize(lambda L, U: np.ones_like(L), g)
    assert fd.query(0.5, 1.9)[0] == 1.0
    assert fd.query(0.5, 2.5)[0] == 0.0
    assert sup_over_grid(fd) == 1.0


def test_discretized_field_nearest_ties_go_left():
    g = make_grid(16, rho=0.25, sigma_mesh=0.5)
    fd = DiscretizedField(g, np.arange(g.total_points, dtype=float))
    # 0.25 is halfway between the first two lambda points
    assert fd.query(0.25, g.u_points[0])[0] == 0.0


def test_discretization_error_bounded_by_grid_distance():
    g = make_grid(16, rho=0.25, sigma_mesh=0.5)
    err = discretization_error(lambda L, U: L * np.clip(1.0 - np.abs(U), 0.0, None), g)
    assert err <= 2 * g.max_distance() + 1e-12


def test_discretize_partial_sum_zero_beyond_its_span():
    g = make_grid(16, rho=0.25, sigma_mesh=0.5)
    P = build_partial_sum(_constant_series([1.0] * 16), GridFunction.zeros(I, 3))
    table = discretize(P, g).values.reshape(len(g.lambda_points), len(g.u_points))
    negative = g.u_points < 0
    assert not np.any(table[:, negative])
    inside = (g.u_points >= 0) & (g.u_points <= 1)
    assert np.allclose(table[:, inside], (g.lambda_points * math.sqrt(16))[:, None])


def test_vectorize_returns_a_copy():
    g = make_grid(16, rho=0.25, sigma_mesh=0.5)
    fd = discretize(lambda L, U: L + U, g)
    v = vectorize(fd)
    v[:] = 0.0
    assert np.any(fd.values)
