import math

import numpy as np
import pytest

from funcspace import (
    DiagnosticsConfig,
    GridFunction,
    Interval,
    diagnose,
    holder_quotient,
    interpolation_matrix,
    restrict,
    sup_norm,
    tail_sup,
)


def test_interval_rejects_empty():
    with pytest.raises(ValueError):
        Interval(1.0, 1.0)


def test_interval_line_truncation():
    I = Interval.line(2.0)
    assert (I.lower, I.upper, I.truncation_of_line) == (-2.0, 2.0, True)
    assert Interval.from_dict(I.to_dict()) == I


def test_gridfunction_values_are_read_only():
    f = GridFunction.zeros(Interval(0, 1), 5)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_gridfunction_rejects_nan():
    with pytest.raises(ValueError):
        GridFunction(Interval(0, 1), [0.0, float("nan"), 1.0])


def test_call_interpolates_linearly():
    f = GridFunction.from_callable(lambda u: 2 * u, Interval(0, 1), 3)
    assert f([0.25, 0.75])[:, 0] == pytest.approx([0.5, 1.5])


def test_call_outside_interval_raises():
    f = GridFunction.zeros(Interval(0, 1), 3)
    with pytest.raises(ValueError):
        f([1.5])


def test_call_outside_line_truncation_is_zero():
    f = GridFunction.constant(Interval.line(1.0), 5, 3.0)
    assert f([-2.0, 0.0, 2.0])[:, 0].tolist() == [0.0, 3.0, 0.0]


def test_arithmetic():
    I = Interval(0, 1)
    f = GridFunction.constant(I, 4, [1.0, 2.0])
    g = GridFunction.constant(I, 4, [0.5, 0.5])
    assert np.all((f + g).values == [1.5, 2.5])
    assert np.all((f - g).values == [0.5, 1.5])
    assert np.all((2 * f).values == [2.0, 4.0])
    assert np.all((f / 2).values == [0.5, 1.0])
    assert np.all((-f).values == [-1.0, -2.0])


def test_arithmetic_rejects_other_interval():
    with pytest.raises(ValueError):
        GridFunction.zeros(Interval(0, 1), 3) + GridFunction.zeros(Interval(0, 2), 3)


def test_to_dict_round_trip_keeps_dimension():
    f = GridFunction(Interval(0, 1), np.arange(6.0).reshape(3, 2))
    g = GridFunction.from_dict(f.to_dict())
    assert g.same_grid(f)
    assert np.array_equal(g.values, f.values)


def test_sup_norm_over_components():
    f = GridFunction(Interval(0, 1), [[1.0, -4.0], [2.0, 0.0]])
    assert sup_norm(f) == 4.0


def test_restrict_aligned_copies_node_values():
    f = GridFunction.from_callable(lambda u: u**2, Interval(0, 1), 11)
    r = restrict(f, Interval(0.2, 0.6))
    assert r.n_nodes == 5
    assert np.array_equal(r.values, f.values[2:7])


def test_restrict_outside_raises():
    f = GridFunction.zeros(Interval(0, 1), 11)
    with pytest.raises(ValueError):
        restrict(f, Interval(0.5, 1.5))


def test_holder_quotient_of_linear_function():
    f = GridFunction.from_callable(lambda u: 3 * u, Interval(0, 1), 21)
    assert holder_quotient(f, 1.0) == pytest.approx(3.0)


def test_holder_quotient_of_square_root():
    f = GridFunction.from_callable(np.sqrt, Interval(0, 1), 101)
    assert holder_quotient(f, 0.5) == pytest.approx(1.0)


def test_tail_sup_and_diagnose():
    f = GridFunction.from_callable(lambda u: np.exp(-u**2), Interval.line(3.0), 61)
    assert tail_sup(f, 1.05) == pytest.approx(math.exp(-1.1**2))
    assert tail_sup(f, 3.0) == 0.0
    out = diagnose(f, DiagnosticsConfig(xi=0.75, kappa=1.0))
    assert set(out) == {"holder_quotient", "sup_norm", "tail_profile"}
    assert out["sup_norm"] == pytest.approx(1.0)


def test_tail_sup_needs_line():
    with pytest.raises(ValueError):
        tail_sup(GridFunction.zeros(Interval(0, 1), 3), 0.5)


def test_diagnostics_config_range():
    with pytest.raises(ValueError):
        DiagnosticsConfig(xi=0.5)


def test_interpolation_matrix_exact_on_nodes():
    nodes = np.linspace(0, 1, 5)
    A = interpolation_matrix(nodes, [0.25, 0.375])
    assert A[0].tolist() == [0.0, 1.0, 0.0, 0.0, 0.0]
    assert A[1, 1] == pytest.approx(0.5)
    assert A[1, 2] == pytest.approx(0.5)


def test_interpolation_matrix_outside():
    nodes = np.linspace(0, 1, 3)
    assert not np.any(interpolation_matrix(nodes, [2.0], zero_outside=True))
    with pytest.raises(ValueError):
        interpolation_matrix(nodes, [2.0])


def test_restrict_twice_equals_restrict_once():
    f = GridFunction.from_callable(lambda u: u**2, Interval(0, 1), 11)
    outer = restrict(f, Interval(0.03, 0.97))
    twice = restrict(outer, Interval(0.13, 0.57))
    once = restrict(f, Interval(0.13, 0.57))
    assert twice.n_nodes == once.n_nodes
    assert np.array_equal(twice.values, once.values)


def test_restrict_twice_on_aligned_then_unaligned_interval():
    f = GridFunction.from_callable(np.sin, Interval(-2, 2), 41)
    twice = restrict(restrict(f, Interval(-1.0, 1.5)), Interval(-0.33, 0.71))
    once = restrict(f, Interval(-0.33, 0.71))
    assert np.array_equal(twice.values, once.values)


def test_restrict_identity_and_constant():
    f = GridFunction.from_callable(lambda u: u**3, Interval(0, 1), 9)
    assert np.array_equal(restrict(f, Interval(0, 1)).values, f.values)
    c = GridFunction.constant(Interval(0, 1), 11, 2.0)
    assert np.all(restrict(c, Interval(0.2, 0.7)).values == 2.0)


def test_restrict_reproduces_affine_functions():
    f = GridFunction.from_callable(lambda u: u, Interval(0, 1), 11)
    r = restrict(f, Interval(0.25, 0.75))
    dense = np.linspace(0.25, 0.75, 201)
    assert np.max(np.abs(r(dense)[:, 0] - dense)) < 1e-12


def test_sup_norm_homogeneity_and_triangle_inequality():
    rng = np.random.default_rng(3)
    I = Interval(-1, 2)
    for _ in range(50):
        f = GridFunction(I, rng.standard_normal((17, 2)))
        g = GridFunction(I, rng.standard_normal((17, 2)))
        s = float(rng.uniform(-3, 3))
        assert sup_norm(s * f) == abs(s) * sup_norm(f)
        assert sup_norm(f + g) <= sup_norm(f) + sup_norm(g)


def test_holder_quotient_bounds_adjacent_increments():
    rng = np.random.default_rng(4)
    I = Interval(0, 1)
    for xi in (0.6, 0.75, 1.0):
        f = GridFunction(I, np.cumsum(rng.standard_normal(33)))
        largest_step = float(np.max(np.abs(np.diff(f.values[:, 0]))))
        assert holder_quotient(f, xi) * f.mesh**xi >= largest_step * (1 - 1e-12)


def test_holder_quotient_of_identity_at_lower_exponent():
    f = GridFunction.from_callable(lambda u: u, Interval(0, 1), 11)
    assert holder_quotient(f, 0.6) == pytest.approx(1.0)


def test_tail_sup_is_non_increasing_in_y():
    rng = np.random.default_rng(5)
    f = GridFunction(Interval.line(4.0), rng.standard_normal(81))
    values = [tail_sup(f, y) for y in np.linspace(0.0, 4.5, 91)]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert values[-1] == 0.0


def test_tail_sup_of_gaussian_bump():
    f = GridFunction.from_callable(lambda u: np.exp(-u**2), Interval.line(10.0), 2001)
    assert tail_sup(f, 3.0) <= math.exp(-9) + 1e-4
