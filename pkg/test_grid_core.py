#!/usr/bin/env python3
"""
Tests for grid_core: axes, graded axes, masks, slices and grid functions
"""

import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grid_core import (Axis, DomainMask, GridError, GridFunction, IndexOutOfRange, ProductGrid,
                       doubling_truncations, integrate, integrate_all, make_geometric_axis, make_uniform_axis,
                       slice_mask)
from testing_utils import random_grid, run_module_tests

PROPERTY_SETTINGS = settings(max_examples=40, derandomize=True, deadline=None)


def test_uniform_axis_measure():
    axis = make_uniform_axis(0.0, 2.0, 8)
    assert axis.size == 8
    assert axis.measure == pytest.approx(2.0, abs=1e-14)
    assert np.allclose(axis.nodes, np.arange(8) * 0.25 + 0.125)
    assert np.allclose(axis.density, 1.0)


def test_weighted_axis_midpoint_rule_is_exact_for_linear_weights():
    axis = make_uniform_axis(0.0, 1.0, 5, lambda x: 1.0 + x)
    assert axis.measure == pytest.approx(1.5, abs=1e-14)
    assert np.allclose(axis.density_at([0.25, 0.5]), [1.25, 1.5])


def test_linear_weight_integrates_exactly_at_any_resolution():
    axis = make_uniform_axis(0.0, 1.0, 1000, lambda x: 2.0 * x)
    assert axis.measure == pytest.approx(1.0, abs=1e-6)


def test_single_cell_axis():
    axis = make_uniform_axis(-1.0, 3.0, 1)
    assert axis.nodes.tolist() == [1.0]
    assert axis.weights.tolist() == [4.0]


def test_axis_rejects_bad_input():
    with pytest.raises(GridError):
        make_uniform_axis(1.0, 1.0, 4)
    with pytest.raises(GridError):
        make_uniform_axis(0.0, 1.0, 0)
    with pytest.raises(GridError, match="negative"):
        make_uniform_axis(0.0, 1.0, 4, lambda x: x - 0.5)
    with pytest.raises(GridError, match="not finite"):
        make_uniform_axis(0.0, 1.0, 4, lambda x: 1.0 / (x - 0.375))
    with pytest.raises(GridError):
        Axis(np.array([0.5, 0.25]), np.ones(2), np.array([0.0, 0.5, 1.0]))


def test_geometric_axis_grading():
    axis = make_geometric_axis(0.0, 100.0, 50, 0.01)
    assert axis.edges[0] == 0.0
    assert axis.edges[1] == pytest.approx(0.01)
    assert axis.upper == pytest.approx(100.0)
    assert axis.measure == pytest.approx(100.0, rel=1e-12)
    assert np.all(np.diff(axis.widths[1:]) > 0)


def test_two_sided_geometric_axis_is_mirrored():
    axis = make_geometric_axis(-10.0, 10.0, 40, 0.05)
    assert axis.size == 40
    assert np.allclose(axis.nodes, -axis.nodes[::-1])
    assert axis.measure == pytest.approx(20.0, rel=1e-12)
    assert 0.0 in axis.edges


def test_locate_clamps_and_contains():
    axis = make_uniform_axis(0.0, 1.0, 4)
    assert axis.locate([-1.0, 0.1, 0.5, 0.99, 5.0]).tolist() == [0, 0, 2, 3, 3]
    assert axis.contains([-0.1, 0.0, 1.0, 1.1]).tolist() == [False, True, True, False]


def test_coverage_counts_partial_cells():
    axis = make_uniform_axis(0.0, 1.0, 4, lambda x: 2.0)
    cover = axis.coverage(0.125, 0.5)
    assert np.allclose(cover, [0.25, 0.5, 0.0, 0.0])
    batch = axis.coverage(np.array([0.0, 0.5]), 1.0)
    assert batch.shape == (2, 4)
    assert np.allclose(batch.sum(axis=1), [2.0, 1.0])


def test_integrate_constant_over_box():
    grid = ProductGrid((make_uniform_axis(0.0, 2.0, 4), make_uniform_axis(0.0, 3.0, 5)))
    f = GridFunction.constant(grid, 1.5)
    assert integrate_all(f) == pytest.approx(9.0)
    inner = integrate(f, 1)
    assert inner.grid.shape == (4,)
    assert np.allclose(inner.values, 4.5)


def test_integrate_the_second_axis_of_a_product():
    axis = make_uniform_axis(0.0, 1.0, 1000)
    f = GridFunction.from_callable(ProductGrid((axis, axis)), lambda x1, x2: x1 * x2)
    assert np.allclose(integrate(f, 1).values, axis.nodes / 2.0, atol=1e-3)


def test_mask_from_callable_and_slices():
    axis = make_uniform_axis(0.0, 1.0, 10)
    grid = ProductGrid((axis, axis))
    triangle = DomainMask.from_callable(grid, lambda x1, x2: x2 <= x1)
    assert triangle.count == 55
    assert slice_mask(triangle, (0,)).count == 1
    assert triangle.slice((9,)).count == 10
    assert triangle.projection(1).all()
    with pytest.raises(IndexOutOfRange):
        slice_mask(triangle, (10,))
    with pytest.raises(GridError):
        slice_mask(triangle, (1, 1))


def test_contains_points_uses_the_mask():
    axis = make_uniform_axis(0.0, 1.0, 4)
    grid = ProductGrid((axis, axis))
    mask = DomainMask.from_callable(grid, lambda x1, x2: x1 < 0.5)
    inside = mask.contains_points((np.array([0.1, 0.9, 1.5]), np.array([0.5, 0.5, 0.5])))
    assert inside.tolist() == [True, False, False]


def test_esssup_ignores_nodes_outside_the_mask():
    axis = make_uniform_axis(0.0, 1.0, 4)
    grid = ProductGrid((axis,))
    mask = DomainMask(grid, [True, True, False, True])
    f = GridFunction(grid, [1.0, -3.0, 10.0, 2.0], mask)
    assert f.esssup() == 3.0
    assert f.argmax_abs() == (1,)
    assert f.masked_values.tolist() == [1.0, -3.0, 0.0, 2.0]


def test_esssup_ignores_zero_weight_nodes():
    axis = Axis(np.array([0.5, 1.5]), np.array([0.0, 1.0]), np.array([0.0, 1.0, 2.0]))
    f = GridFunction(ProductGrid((axis,)), [5.0, 1.0], ProductGrid((axis,)).full_mask())
    assert f.esssup() == 1.0


def test_grid_function_shape_checks():
    grid = ProductGrid((make_uniform_axis(0.0, 1.0, 3),))
    with pytest.raises(GridError):
        GridFunction(grid, np.zeros(4), grid.full_mask())
    other = ProductGrid((make_uniform_axis(0.0, 2.0, 3),))
    with pytest.raises(GridError):
        GridFunction(grid, np.zeros(3), other.full_mask())


def test_doubling_truncations():
    assert doubling_truncations(10.0, 3) == [10.0, 20.0, 40.0]
    with pytest.raises(GridError):
        doubling_truncations(1.0, 0)


# ==================== PROPERTIES ====================

def random_masked_function(rng, grid, mask):
    return GridFunction(grid, rng.normal(size=grid.shape), mask)


@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=10 ** 6), st.floats(min_value=-5.0, max_value=5.0),
       st.floats(min_value=-5.0, max_value=5.0))
def test_integrate_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, (3, 4, 5))
    mask = DomainMask(grid, rng.random(grid.shape) < 0.6)
    f, g = random_masked_function(rng, grid, mask), random_masked_function(rng, grid, mask)
    combined = GridFunction(grid, a * f.values + b * g.values, mask)
    for axis_index in range(grid.ndim):
        expected = a * integrate(f, axis_index).values + b * integrate(g, axis_index).values
        assert np.allclose(integrate(combined, axis_index).values, expected, rtol=1e-10, atol=1e-10)
    assert integrate_all(combined) == pytest.approx(a * integrate_all(f) + b * integrate_all(g),
                                                    rel=1e-10, abs=1e-10)


@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_masking_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, (4, 3, 5))
    f = random_masked_function(rng, grid, DomainMask(grid, rng.random(grid.shape) < 0.5))
    zeroed = GridFunction(grid, f.masked_values, grid.full_mask())
    for axis_index in range(grid.ndim):
        assert np.array_equal(integrate(zeroed, axis_index).values, integrate(f, axis_index).values)
    assert integrate_all(zeroed) == integrate_all(f)


@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_slices_cover_every_projection(seed):
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, (3, 4, 5))
    mask = DomainMask(grid, rng.random(grid.shape) < 0.15)
    for axis_index in range(grid.ndim):
        union = np.zeros(grid.shape[axis_index], dtype=bool)
        for prefix in np.ndindex(*grid.shape[:axis_index]):
            union |= slice_mask(mask, prefix).projection(0)
        assert np.array_equal(union, mask.projection(axis_index)), axis_index


if __name__ == "__main__":
    exit_code = run_module_tests(globals(), "GRID CORE TEST SUITE")
    sys.exit(exit_code)
