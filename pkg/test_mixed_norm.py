#!/usr/bin/env python3
"""
Tests for mixed_norm: closed forms, axis order, overflow handling, the slice
recursion and Minkowski's integral inequality
"""

import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grid_core import DomainMask, GridFunction, IndexOutOfRange, ProductGrid, make_uniform_axis
from mixed_norm import (ExponentError, ExponentVector, MixedNormOverflow, SharpConstantUndefined, axis_norm,
                        minkowski_gap, mixed_norm, recompose_from_slices, slice_norm, slice_norm_profile)
from testing_utils import random_grid, run_module_tests
from verification_suite import f23, truncated_f23_norm

PROPERTY_SETTINGS = settings(max_examples=50, derandomize=True, deadline=None)


def box(*bounds, m=8):
    return ProductGrid(tuple(make_uniform_axis(a, b, m) for a, b in bounds))


def test_constant_function_closed_form():
    grid = box((0.0, 2.0), (0.0, 3.0))
    value = mixed_norm(GridFunction.constant(grid, 1.0), (2, 3))
    assert value == pytest.approx(math.sqrt(2.0 * 3.0 ** (2.0 / 3.0)), rel=1e-12)


def test_f23_on_a_truncated_box():
    grid = box((-50.0, 50.0), (-50.0, 50.0), m=400)
    value = mixed_norm(GridFunction.from_callable(grid, f23), (2, 3))
    assert value == pytest.approx(truncated_f23_norm(50.0), rel=0.02)


def test_axis_order_matters():
    grid = box((-50.0, 50.0), (-50.0, 50.0), m=200)
    forward = mixed_norm(GridFunction.from_callable(grid, f23), (2, 3))
    swapped = mixed_norm(GridFunction.from_callable(grid, lambda y1, y2: f23(y2, y1)), (2, 3))
    assert abs(forward - swapped) > 0.1 * forward


def test_separable_functions_factor():
    grid = box((0.0, 1.0), (0.0, 2.0), m=30)
    f = GridFunction.from_callable(grid, lambda y1, y2: (1.0 + y1) * np.exp(-y2))
    g = axis_norm(1.0 + grid.axes[0].nodes, grid.axes[0], 3.0)
    h = axis_norm(np.exp(-grid.axes[1].nodes), grid.axes[1], 2.0)
    assert mixed_norm(f, (3, 2)) == pytest.approx(g * h, rel=1e-10)


def test_p_equal_one_is_the_weighted_integral():
    rng = np.random.default_rng(4)
    grid = random_grid(rng, (5, 6, 7))
    f = GridFunction(grid, rng.normal(size=grid.shape), grid.full_mask())
    expected = float(np.sum(np.abs(f.values) * grid.weight_tensor()))
    assert mixed_norm(f, (1, 1, 1)) == pytest.approx(expected, rel=1e-12)


def test_mask_restricts_the_integration():
    grid = box((0.0, 1.0), (0.0, 1.0), m=10)
    half = DomainMask.from_callable(grid, lambda y1, y2: y1 < 0.5)
    f = GridFunction.constant(grid, 1.0, half)
    assert mixed_norm(f, (2, 2)) == pytest.approx(math.sqrt(0.5), rel=1e-12)


def test_exponent_validation():
    with pytest.raises(ExponentError):
        ExponentVector((0.5, 2.0))
    with pytest.raises(ExponentError):
        ExponentVector(())
    with pytest.raises(ExponentError):
        ExponentVector((2.0, math.inf))
    with pytest.raises(ExponentError):
        mixed_norm(GridFunction.constant(box((0.0, 1.0)), 1.0), (2, 2))
    with pytest.raises(SharpConstantUndefined):
        ExponentVector((1.0,)).hardy_factor(0)
    P = ExponentVector((1.0, 3.0))
    assert P.conjugate(0) == math.inf
    assert P.conjugate(1) == pytest.approx(1.5)
    assert P.tail().p == (3.0,)


def test_large_and_tiny_values_keep_their_scale():
    grid = box((0.0, 1.0), (0.0, 1.0), m=6)
    f = GridFunction.from_callable(grid, lambda y1, y2: 1.0 + y1 * y2)
    assert mixed_norm(f.scaled(1e200), (3, 4)) == pytest.approx(1e200 * mixed_norm(f, (3, 4)), rel=1e-10)
    assert mixed_norm(f.scaled(1e-200), (3, 4)) == pytest.approx(1e-200 * mixed_norm(f, (3, 4)), rel=1e-10)
    tiny = GridFunction.constant(box((0.0, 1.0), (0.0, 1.0), m=8), 1.0).scaled(1e-120)
    assert mixed_norm(tiny, (3, 3)) == pytest.approx(1e-120, rel=1e-12)


def test_huge_weights_fall_back_to_the_log_domain():
    axis = make_uniform_axis(0.0, 1.0, 4, lambda t: 1e250 + 0.0 * t)
    grid = ProductGrid((axis, axis))
    assert mixed_norm(GridFunction.constant(grid, 1.0), (2, 2)) == pytest.approx(1e250, rel=1e-10)


def test_non_finite_values_raise():
    grid = box((0.0, 1.0), m=3)
    with pytest.raises(MixedNormOverflow):
        mixed_norm(GridFunction(grid, [1.0, math.inf, 1.0], grid.full_mask()), (2,))


def test_axis_norm_at_infinity_is_the_max():
    axis = make_uniform_axis(0.0, 1.0, 4)
    assert axis_norm([1.0, -5.0, 2.0, 0.0], axis, math.inf) == 5.0
    assert axis_norm([2.0, 2.0, 2.0, 2.0], axis, 2.0) == pytest.approx(2.0)


def test_slice_norm_of_a_one_dimensional_function():
    grid = box((0.0, 1.0), m=3)
    f = GridFunction(grid, [1.0, -2.0, 3.0], grid.full_mask())
    assert slice_norm(f, None, 1) == 2.0
    with pytest.raises(ExponentError):
        slice_norm(f, (2.0,), 1)
    with pytest.raises(IndexOutOfRange):
        slice_norm(f, None, -1)
    with pytest.raises(IndexOutOfRange):
        slice_norm(f, None, 3)


@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=10 ** 6), st.floats(min_value=-250.0, max_value=250.0),
       st.booleans())
def test_homogeneity(seed, exponent, negative):
    c = (-1.0 if negative else 1.0) * 10.0 ** exponent
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, (4, 5))
    f = GridFunction(grid, rng.normal(size=grid.shape), grid.full_mask())
    P = tuple(rng.uniform(1.0, 6.0, 2))
    assert mixed_norm(f.scaled(c), P) == pytest.approx(abs(c) * mixed_norm(f, P), rel=1e-12, abs=1e-300)


@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_slice_recursion(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    grid = random_grid(rng, tuple(int(k) for k in rng.integers(2, 7, n)))
    mask = DomainMask(grid, rng.random(grid.shape) < 0.7)
    f = GridFunction(grid, rng.normal(size=grid.shape), mask)
    P = tuple(rng.uniform(1.0, 5.0, n))
    recomposed = recompose_from_slices(slice_norm_profile(f, P), grid.axes[0], P[0])
    assert recomposed == pytest.approx(mixed_norm(f, P), rel=1e-12, abs=1e-300)


@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=10 ** 6), st.floats(min_value=1.0, max_value=6.0))
def test_minkowski_inequality(seed, p):
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, (int(rng.integers(2, 12)), int(rng.integers(2, 12))))
    f = GridFunction(grid, rng.normal(size=grid.shape), grid.full_mask())
    assert minkowski_gap(f, p).holds


def test_minkowski_is_strict_for_a_checkerboard():
    grid = box((0.0, 1.0), (0.0, 1.0), m=6)
    k, j = np.indices(grid.shape)
    f = GridFunction(grid, np.where((k + j) % 2 == 0, 1.0, -1.0), grid.full_mask())
    gap = minkowski_gap(f, 2.0)
    assert gap.lhs < gap.rhs
    assert gap.rhs == pytest.approx(1.0)


def test_minkowski_equality_for_separable_functions():
    rng = np.random.default_rng(11)
    grid = random_grid(rng, (9, 13))
    f = GridFunction(grid, np.outer(rng.random(9), rng.random(13)), grid.full_mask())
    gap = minkowski_gap(f, 2.5)
    assert gap.lhs == pytest.approx(gap.rhs, rel=1e-10)


if __name__ == "__main__":
    exit_code = run_module_tests(globals(), "MIXED NORM TEST SUITE")
    sys.exit(exit_code)
