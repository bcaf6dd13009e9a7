import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asadg.exceptions import DimensionMismatch, InvalidParams, NonFiniteResult
from asadg.transport import (
    Case1Source,
    ChebyshevField,
    SpatialGrid,
    TransportParams,
    eval_case1_source,
    expand_chebyshev,
    pack_case2_input,
    residual,
    solve,
    to_complex,
    to_real,
    unpack_case2_input,
)


def closed_form(c, k, m, x):
    return (c / (1j * k)) * (np.exp(1j * k * x / m) - 1.0)


def constant_source(c):
    return lambda x: np.full(np.shape(x), c, dtype=complex)


def max_error(node_count, c=1.0, k=2.0, m=1.0):
    grid = SpatialGrid(node_count)
    y = to_complex(solve(TransportParams(k, m, constant_source(c)), grid))
    return float(np.max(np.abs(y - closed_form(c, k, m, grid.nodes))))


class TestSolve:
    def test_homogeneous_problem_gives_zero(self):
        grid = SpatialGrid(33)
        y = solve(TransportParams(1.0, 0.5, np.zeros(33)), grid)
        assert np.all(y == 0.0)

    def test_constant_source_matches_closed_form(self):
        assert max_error(257) < 1e-8

    def test_nonunit_mach_and_complex_amplitude(self):
        grid = SpatialGrid(257)
        c, k, m = 0.3 - 0.7j, 5.0, 0.6
        y = to_complex(solve(TransportParams(k, m, constant_source(c)), grid))
        assert np.max(np.abs(y - closed_form(c, k, m, grid.nodes))) < 1e-7

    def test_fourth_order_convergence(self):
        errors = [max_error(n, k=20.0) for n in (65, 129, 257)]
        assert errors[0] / errors[1] >= 12
        assert errors[1] / errors[2] >= 12

    def test_boundary_components_are_zero(self):
        grid = SpatialGrid(65)
        y = solve(TransportParams(20.0, 0.7, Case1Source(1.0, 30.0, 0.05, 0.4)), grid)
        assert y[0] == 0.0 and y[65] == 0.0

    def test_output_layout_is_real_then_imaginary(self):
        grid = SpatialGrid(9)
        y = solve(TransportParams(2.0, 1.0, constant_source(1.0)), grid)
        assert y.shape == (18,)
        np.testing.assert_array_equal(to_real(to_complex(y)), y)

    def test_superposition(self):
        grid = SpatialGrid(129)
        rng = np.random.default_rng(3)
        g1 = rng.normal(size=129) + 1j * rng.normal(size=129)
        g2 = rng.normal(size=129) + 1j * rng.normal(size=129)
        y1 = solve(TransportParams(2.0, 1.0, g1), grid)
        y2 = solve(TransportParams(2.0, 1.0, g2), grid)
        y12 = solve(TransportParams(2.0, 1.0, g1 + g2), grid)
        np.testing.assert_allclose(y12, y1 + y2, rtol=1e-12, atol=1e-12 * np.max(np.abs(y12)))

    @given(st.floats(-5, 5), st.floats(0.3, 1.0))
    def test_homogeneity_in_source(self, scale, mach):
        grid = SpatialGrid(33)
        src = Case1Source(1.0, 30.0, 0.05, 0.5)
        y = solve(TransportParams(20.0, mach, src), grid)
        ys = solve(TransportParams(20.0, mach, lambda x: scale * src(x)), grid)
        np.testing.assert_allclose(ys, scale * y, rtol=1e-12, atol=1e-12 * (1 + np.max(np.abs(y))))

    def test_nodal_mach_field_equals_scalar(self):
        grid = SpatialGrid(65)
        src = Case1Source(1.0, 30.0, 0.05, 0.5)
        g = src(grid.nodes)
        y_scalar = solve(TransportParams(20.0, 0.7, g), grid)
        y_field = solve(TransportParams(20.0, np.full(65, 0.7), g), grid)
        np.testing.assert_allclose(y_field, y_scalar, rtol=1e-13, atol=1e-15)

    def test_field_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve(TransportParams(1.0, np.ones(10), np.ones(10)), SpatialGrid(11))

    def test_zero_mach_rejected(self):
        with pytest.raises(InvalidParams):
            TransportParams(1.0, 0.0, np.ones(5))

    def test_overflow_raises(self):
        # Im(k)/m this large makes the growth factor overflow double precision
        with pytest.raises(NonFiniteResult):
            solve(TransportParams(-1e6j, 1e-3, constant_source(1.0)), SpatialGrid(257))


class TestResidual:
    def test_zero_solution_of_homogeneous_problem(self):
        grid = SpatialGrid(17)
        assert residual(TransportParams(3.0, 0.5, np.zeros(17)), np.zeros(34), grid) == 0.0

    def test_self_consistency_case1(self):
        grid = SpatialGrid(257)
        rng = np.random.default_rng(11)
        for _ in range(20):
            m, xm = rng.uniform(0.3, 1.0), rng.uniform(0.2, 0.8)
            p = TransportParams(20.0, m, Case1Source(1.0, 30.0, 0.05, xm))
            assert residual(p, solve(p, grid), grid) <= 1e-8

    def test_perturbation_increases_residual(self):
        grid = SpatialGrid(129)
        p = TransportParams(20.0, 0.5, Case1Source(1.0, 30.0, 0.05, 0.5))
        y = solve(p, grid)
        bump = np.zeros_like(y)
        bump[40] = 1.0
        assert residual(p, y + bump, grid) > residual(p, y, grid)

    def test_boundary_penalty(self):
        grid = SpatialGrid(17)
        p = TransportParams(3.0, 0.5, np.zeros(17))
        y = np.zeros(34)
        y[0] = 0.25
        # y is not a solution away from x=0 either, so the value exceeds the penalty alone
        assert residual(p, y, grid) >= 0.25

    def test_central_scheme_is_second_order_on_exact_solution(self):
        values = []
        for n in (65, 129, 257):
            grid = SpatialGrid(n)
            p = TransportParams(2.0, 1.0, constant_source(1.0))
            exact = to_real(closed_form(1.0, 2.0, 1.0, grid.nodes))
            values.append(residual(p, exact, grid, scheme="central"))
        assert values[0] / values[1] > 3.5 and values[1] / values[2] > 3.5

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            residual(TransportParams(1.0, 1.0, np.zeros(5)), np.zeros(8), SpatialGrid(5))

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            residual(TransportParams(1.0, 1.0, np.zeros(5)), np.zeros(10), SpatialGrid(5), "upwind")


class TestSources:
    def test_gaussian_only_at_origin(self):
        assert eval_case1_source(Case1Source(0.0, 0.0, 1.0, 0.0), 0.0) == 1 + 0j

    def test_peak_plus_unit_amplitude(self):
        assert eval_case1_source(Case1Source(1.0, 0.0, 1.0, 0.3), 0.3) == 2 + 0j

    def test_rotated_peak(self):
        # scalar oracle: exp(i pi / 2) * (1 + 1)
        value = eval_case1_source(Case1Source(1.0, math.pi, 0.1, 0.5), 0.5)
        assert abs(value - 2j) < 1e-15
        assert abs(value - cmath.exp(1j * math.pi / 2) * 2) < 1e-15

    def test_sigma_must_be_positive(self):
        with pytest.raises(InvalidParams):
            Case1Source(1.0, 1.0, 0.0, 0.5)


def chebyshev_recurrence(coefficients, t):
    """T_0 = 1, T_1 = t, T_{n+1} = 2 t T_n - T_{n-1}."""
    t_prev, t_cur = 1.0, t
    total = coefficients[0] * t_prev
    for c in coefficients[1:]:
        total += c * t_cur
        t_prev, t_cur = t_cur, 2 * t * t_cur - t_prev
    return total


class TestChebyshev:
    def test_constant(self):
        np.testing.assert_array_equal(expand_chebyshev(ChebyshevField([1.0]), SpatialGrid(7)), 1.0)

    def test_linear_maps_unit_interval(self):
        np.testing.assert_allclose(expand_chebyshev(ChebyshevField([0, 1]), SpatialGrid(3)), [-1, 0, 1])

    def test_quadratic_at_midpoint(self):
        assert expand_chebyshev(ChebyshevField([0, 0, 1]), SpatialGrid(3))[1] == -1.0

    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=7))
    def test_matches_recurrence(self, coefficients):
        grid = SpatialGrid(11)
        got = expand_chebyshev(ChebyshevField(coefficients), grid)
        want = [chebyshev_recurrence(coefficients, 2 * x - 1) for x in grid.nodes]
        np.testing.assert_allclose(got, want, atol=1e-12)


class TestPacking:
    def test_concatenation_order(self):
        np.testing.assert_array_equal(pack_case2_input([1, 1], [0, 0], [0, 0]), [1, 1, 0, 0, 0, 0])

    @given(st.integers(1, 40), st.integers(0, 2**32 - 1))
    def test_round_trip(self, n, seed):
        rng = np.random.default_rng(seed)
        a, b, c = rng.normal(size=(3, n))
        for got, want in zip(unpack_case2_input(pack_case2_input(a, b, c)), (a, b, c)):
            np.testing.assert_array_equal(got, want)

    def test_full_scale_length(self):
        assert pack_case2_input(np.ones(1024), np.zeros(1024), np.zeros(1024)).size == 3072

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            pack_case2_input([1, 2], [1], [1, 2])
