#!/usr/bin/env python3
"""
Tests for the operators: Hardy, product kernels, multiplication,
Hardy-Steklov, the composed operator I and the partial operator constants
"""

import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grid_core import DomainMask, GridError, GridFunction, ProductGrid, make_uniform_axis
from mixed_norm import SharpConstantUndefined, mixed_norm
from operators import (KernelContractError, KernelSet, LimitsError, OperatorDomainError, SteklovLimits,
                       discrete_operator_norm, hardy_apply, hardy_constant, hardy_dilation_apply, hardy_prefix,
                       multiplication_apply, operator_I_apply, operator_I_pipeline, partial_apply,
                       partial_constant_profile, product_apply, rank_one_partial_constant, steklov_apply,
                       steklov_partial_apply)
from testing_utils import run_module_tests
from triangular_map import MapLayer, TriangularMap, identity_map

PROPERTY_SETTINGS = settings(max_examples=40, derandomize=True, deadline=None)


def box(*bounds, m=10):
    return ProductGrid(tuple(make_uniform_axis(a, b, m) for a, b in bounds))


def random_function(grid, seed):
    rng = np.random.default_rng(seed)
    return GridFunction(grid, rng.random(grid.shape), grid.full_mask())


# ==================== HARDY ====================

def test_hardy_of_a_constant_is_the_constant():
    grid = box((0.0, 3.0), (0.0, 2.0), m=12)
    result = hardy_apply(GridFunction.constant(grid, 2.5), n=2)
    assert np.allclose(result.values, 2.5, rtol=1e-12)


def test_hardy_of_an_indicator_decays_like_one_over_x():
    grid = box((0.0, 10.0), m=100)
    f = GridFunction.from_callable(grid, lambda y: np.where(y <= 1.0, 1.0, 0.0))
    result = hardy_apply(f)
    x = grid.axes[0].nodes
    assert np.allclose(result.values[x > 1.0], 1.0 / x[x > 1.0], rtol=1e-12)
    assert np.allclose(result.values[x < 1.0], 1.0, rtol=1e-12)


def test_hardy_prefix_takes_half_of_the_own_cell():
    grid = box((0.0, 1.0), m=4)
    prefix = hardy_prefix(np.ones(4), grid)
    assert np.allclose(prefix, grid.axes[0].nodes, rtol=1e-12)
    assert not np.allclose(prefix, grid.axes[0].edges[1:])


def test_hardy_requires_axes_anchored_at_zero():
    with pytest.raises(GridError):
        hardy_apply(GridFunction.constant(box((1.0, 2.0)), 1.0))
    with pytest.raises(GridError):
        hardy_apply(GridFunction.constant(box((0.0, 2.0)), 1.0), n=2)


def test_hardy_constant():
    assert hardy_constant((2, 2)) == pytest.approx(4.0)
    assert hardy_constant((3,)) == pytest.approx(1.5)
    with pytest.raises(SharpConstantUndefined):
        hardy_constant((1.0, 2.0))


def test_dilation_form_matches_prefix_sums():
    grid = box((0.0, 2.0), (0.0, 2.0), m=200)

    def fn(y1, y2):
        return np.exp(-y1) * (1.0 + y2)

    direct = hardy_apply(GridFunction.from_callable(grid, fn)).values
    dilated = hardy_dilation_apply(fn, grid, order=16).values
    x1, x2 = grid.dense_coordinates()
    away = (x1 > 0.5) & (x2 > 0.5)
    assert np.allclose(direct[away], dilated[away], rtol=1e-3)


@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=10 ** 6), st.floats(min_value=1.5, max_value=4.0))
def test_hardy_inequality_on_random_nonnegative_functions(seed, p):
    grid = box((0.0, 5.0), m=30)
    f = random_function(grid, seed)
    assert mixed_norm(hardy_apply(f), (p,)) <= hardy_constant((p,)) * mixed_norm(f, (p,)) * 1.01


@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=10 ** 6), st.floats(min_value=1.5, max_value=4.0),
       st.floats(min_value=1.5, max_value=4.0))
def test_mixed_hardy_inequality(seed, p1, p2):
    grid = box((0.0, 4.0), (0.0, 4.0), m=16)
    f = random_function(grid, seed)
    P = (p1, p2)
    assert mixed_norm(hardy_apply(f), P) <= hardy_constant(P) * mixed_norm(f, P) * 1.01


# ==================== PRODUCT OPERATOR ====================

def brute_force_product(k1, k2, f, x_grid):
    y1, y2 = (axis.nodes for axis in f.grid.axes)
    w1, w2 = (axis.weights for axis in f.grid.axes)
    x1, x2 = (axis.nodes for axis in x_grid.axes)
    first = k1(x1[:, None], y1[None, :]) * w1                                     # (x1, y1)
    second = k2(x1[:, None, None], x2[None, :, None], y2[None, None, :]) * w2     # (x1, x2, y2)
    return np.einsum('ab,acd,bd->ac', first, second, f.masked_values)


def test_product_operator_matches_the_brute_force_sum():
    source = box((0.0, 1.0), (0.0, 2.0), m=6)
    target = box((0.0, 1.0), (0.0, 1.0), m=5)

    def k1(x1, y1):
        return np.exp(-x1 * y1)

    def k2(x1, x2, y2):
        return 1.0 + x1 * x2 + y2 ** 2

    f = random_function(source, 3)
    result = product_apply(KernelSet((k1, k2)), f, target=target)
    assert result.grid.shape == (5, 5)
    assert np.allclose(result.values, brute_force_product(k1, k2, f, target), rtol=1e-12)


def test_rank_one_product_is_separable():
    grid = box((0.0, 1.0), (0.0, 1.0), m=7)
    kernels = KernelSet.rank_one([(lambda x: 1.0 + x, lambda y: y), (lambda x: np.exp(x), lambda y: 2.0 - y)])
    f = GridFunction.constant(grid, 1.0)
    result = product_apply(kernels, f)
    x1, x2 = grid.dense_coordinates()
    y = grid.axes[0].nodes
    w = grid.axes[0].weights
    expected = (1.0 + x1) * np.sum(y * w) * np.exp(x2) * np.sum((2.0 - y) * w)
    assert np.allclose(result.values, expected, rtol=1e-12)


def test_negative_kernels_are_rejected():
    grid = box((0.0, 1.0), (0.0, 1.0), m=4)
    kernels = KernelSet((lambda x1, y1: x1 - y1, lambda x1, x2, y2: 1.0 + 0.0 * y2))
    with pytest.raises(KernelContractError):
        product_apply(kernels, GridFunction.constant(grid, 1.0))
    with pytest.raises(KernelContractError):
        kernels.check_nonnegative(grid, grid)


def test_partial_operator():
    axis = make_uniform_axis(0.0, 1.0, 20)
    kernels = KernelSet.rank_one([(lambda x: x, lambda y: 1.0 + 0.0 * y), (lambda x: x, lambda y: y)])
    g = GridFunction.constant(ProductGrid((axis,)), 1.0)
    result = partial_apply(kernels, 1, g, [0.3], axis)
    assert np.allclose(result.values, axis.nodes * 0.5, rtol=1e-12)
    with pytest.raises(GridError):
        partial_apply(kernels, 1, g, [], axis)


def test_partial_operator_with_an_indicator_kernel():
    axis = make_uniform_axis(0.0, 1.0, 1000)
    kernels = KernelSet((lambda x1, y1: np.where(y1 <= x1, 1.0, 0.0),))
    g = GridFunction.from_callable(ProductGrid((axis,)), lambda y: y)
    result = partial_apply(kernels, 0, g, [], axis)
    assert np.allclose(result.values, axis.nodes ** 2 / 2.0, atol=1e-3)


# ==================== MULTIPLICATION ====================

def test_multiplication_intersects_masks():
    grid = box((0.0, 1.0), m=4)
    f = GridFunction(grid, [1.0, 2.0, 3.0, 4.0], DomainMask(grid, [True, True, True, False]))
    g = GridFunction(grid, [2.0, 2.0, 2.0, 2.0], DomainMask(grid, [False, True, True, True]))
    product = multiplication_apply(f, g)
    assert product.masked_values.tolist() == [0.0, 4.0, 6.0, 0.0]
    assert product.mask.indicator.tolist() == [False, True, True, False]


# ==================== HARDY-STEKLOV ====================

def zero(x1, x2):
    return 0.0 * x1 + 0.0 * x2


def test_steklov_with_anchored_limits_is_the_hardy_integral():
    grid = box((0.0, 1.0), (0.0, 2.0), m=9)
    f = random_function(grid, 5)
    limits = SteklovLimits((zero, zero), (lambda x1, x2: x1 + 0.0 * x2, lambda x1, x2: x2 + 0.0 * x1))
    result = steklov_apply(limits, None, f)
    assert np.allclose(result.values, hardy_prefix(f.masked_values, grid), rtol=1e-12)


def test_steklov_window_integral():
    grid = box((0.0, 1.0), (0.0, 1.0), m=40)
    f = GridFunction.constant(grid, 1.0)
    limits = SteklovLimits((lambda x1, x2: x1 / 2.0, zero), (lambda x1, x2: x1 + 0.0 * x2, lambda x1, x2: x2))
    result = steklov_apply(limits, None, f)
    x1, x2 = grid.dense_coordinates()
    assert np.allclose(result.values, (x1 / 2.0) * x2, rtol=1e-12)


def test_steklov_with_empty_windows_vanishes():
    grid = box((0.0, 1.0), (0.0, 1.0), m=8)
    same = (lambda x1, x2: x1 + 0.0 * x2, lambda x1, x2: x2 + 0.0 * x1)
    result = steklov_apply(SteklovLimits(same, same), None, random_function(grid, 2))
    assert np.all(result.values == 0.0)


def test_steklov_limits_must_be_ordered():
    grid = box((0.0, 1.0), (0.0, 1.0), m=5)
    limits = SteklovLimits((lambda x1, x2: x1, zero), (lambda x1, x2: x1 / 2.0, lambda x1, x2: x2))
    with pytest.raises(LimitsError):
        limits.validate(grid)
    with pytest.raises(GridError):
        steklov_apply(limits, None, GridFunction.constant(box((0.0, 1.0)), 1.0))


def test_steklov_partial_operators():
    axis = make_uniform_axis(0.0, 1.0, 50)
    g = GridFunction.constant(ProductGrid((axis,)), 1.0)
    limits = SteklovLimits((lambda x1, x2: x1 / 2.0, zero), (lambda x1, x2: x1 + 0.0 * x2, lambda x1, x2: x1 * x2))
    first = steklov_partial_apply(limits, None, 0, g, 0.7, axis)
    assert np.allclose(first.values, axis.nodes / 2.0, rtol=1e-12)
    second = steklov_partial_apply(limits, None, 1, g, 0.5, axis)
    assert np.allclose(second.values, 0.5 * axis.nodes, rtol=1e-12)
    with pytest.raises(GridError):
        steklov_partial_apply(limits, None, 2, g, 0.5, axis)


# ==================== LINEARITY AND POSITIVITY ====================

def sample_operators():
    kernels = KernelSet((lambda x1, y1: np.exp(-np.abs(x1 - y1)), lambda x1, x2, y2: 1.0 + x1 * x2 * y2))
    limits = SteklovLimits((lambda x1, x2: x1 / 3.0, zero), (lambda x1, x2: x1 + 0.0 * x2, lambda x1, x2: x2))
    return {
        'hardy': hardy_apply,
        'product': lambda f: product_apply(kernels, f),
        'steklov': lambda f: steklov_apply(limits, None, f),
    }


@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=10 ** 6), st.floats(min_value=-3.0, max_value=3.0),
       st.floats(min_value=-3.0, max_value=3.0))
def test_operators_are_linear(seed, a, b):
    grid = box((0.0, 1.0), (0.0, 1.0), m=7)
    rng = np.random.default_rng(seed)
    f = GridFunction(grid, rng.normal(size=grid.shape), grid.full_mask())
    g = GridFunction(grid, rng.normal(size=grid.shape), grid.full_mask())
    combined = GridFunction(grid, a * f.values + b * g.values, grid.full_mask())
    for name, apply in sample_operators().items():
        expected = a * apply(f).values + b * apply(g).values
        assert np.allclose(apply(combined).values, expected, rtol=1e-10, atol=1e-10), name


@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_operators_are_positive(seed):
    grid = box((0.0, 1.0), (0.0, 1.0), m=7)
    f = random_function(grid, seed)
    for name, apply in sample_operators().items():
        assert np.all(apply(f).values >= 0.0), name


# ==================== OPERATOR I ====================

def test_operator_I_with_the_identity_map_is_hardy():
    grid = box((0.0, 1.0), (0.0, 1.0), m=12)
    f = random_function(grid, 9)
    g = GridFunction.from_callable(grid, lambda y1, y2: 1.0 + y1 * y2)
    direct = operator_I_apply(identity_map(grid.full_mask()), g, f)
    assert np.allclose(direct.values, hardy_apply(multiplication_apply(f, g)).values, rtol=1e-12)


def test_operator_I_matches_the_staged_pipeline():
    grid = box((0.0, 1.0), (0.0, 1.0), m=30)
    map_ = TriangularMap([MapLayer(lambda x1: 0.5 * x1 + 0.5 * x1 ** 2),
                          MapLayer(lambda x1, x2: x2 * (0.5 + 0.5 * x1))], grid.full_mask(), grid.full_mask())
    f = GridFunction.from_callable(grid, lambda y1, y2: np.exp(-y1 - y2))
    g = GridFunction.from_callable(grid, lambda y1, y2: 1.0 + y2)
    direct = operator_I_apply(map_, g, f).values
    staged = operator_I_pipeline(map_, g, f).values
    assert np.max(np.abs(direct - staged)) <= 2e-2 * np.max(np.abs(direct))


def test_operator_I_rejects_nonpositive_layers():
    grid = box((0.0, 1.0), m=10)
    map_ = TriangularMap([MapLayer(lambda x1: x1 - 0.5)], grid.full_mask(), grid.full_mask())
    with pytest.raises(OperatorDomainError):
        operator_I_apply(map_, GridFunction.constant(grid, 1.0), GridFunction.constant(grid, 1.0))


# ==================== PARTIAL CONSTANTS ====================

def test_power_iteration_is_exact_for_rank_one_kernels():
    x_axis = make_uniform_axis(0.0, 1.0, 30)
    y_axis = make_uniform_axis(0.0, 2.0, 40)

    def u(x):
        return 1.0 + x

    def v(y):
        return np.exp(-y)

    matrix = u(x_axis.nodes)[:, None] * v(y_axis.nodes)[None, :]
    estimate = discrete_operator_norm(matrix, x_axis, y_axis, 3.0, 2.0)
    assert estimate.converged
    assert estimate.value == pytest.approx(rank_one_partial_constant(u, v, x_axis, y_axis, 3.0, 2.0), rel=1e-10)


def test_q_equal_one_takes_the_largest_column():
    axis = make_uniform_axis(0.0, 1.0, 2)
    matrix = np.array([[1.0, 3.0], [1.0, 0.0]])
    estimate = discrete_operator_norm(matrix, axis, axis, 2.0, 1.0)
    assert estimate.value == pytest.approx(np.sqrt(0.5 * 9.0))


def test_partial_constant_profile_for_rank_one_kernels():
    grid = box((0.0, 1.0), (0.0, 1.0), m=12)
    factors = [(lambda x: 1.0 + x, lambda y: 1.0 + y), (lambda x: np.exp(x), lambda y: y)]
    kernels = KernelSet.rank_one(factors)
    profile = partial_constant_profile(kernels, 1, grid, grid, 2.0, 3.0, samples=5)
    assert len(profile.values) == 5
    expected = rank_one_partial_constant(*factors[1], grid.axes[1], grid.axes[1], 2.0, 3.0)
    assert profile.sup == pytest.approx(expected, rel=1e-9)


if __name__ == "__main__":
    exit_code = run_module_tests(globals(), "OPERATORS TEST SUITE")
    sys.exit(exit_code)
