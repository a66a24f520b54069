"""
Operators Module
Hardy operators H_n, kernel product operators K with their partial operators,
multiplication operators M_g, the two-dimensional Hardy-Steklov operator and the
composite operator I = C_phi H_n M_g
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from grid_core import (Axis, DomainMask, GridError, GridFunction, MixnormError, ProductGrid,
                       _along)
from mixed_norm import ExponentError, ExponentLike, as_exponents, axis_norm
from triangular_map import TriangularMap, pullback

logger = logging.getLogger(__name__)

ANCHOR_TOLERANCE = 1e-12
POWER_ITERATIONS = 500


class KernelContractError(MixnormError):
    """A kernel produced a negative or non-finite value"""


class LimitsError(MixnormError):
    """Lower integration limit above the upper one"""


class OperatorDomainError(MixnormError):
    """Operator input outside the region where it is defined"""


# ==================== KERNELS AND LIMITS ====================

def _evaluate(fn: Callable, *args) -> np.ndarray:
    shape = np.broadcast_shapes(*(np.shape(a) for a in args))
    with np.errstate(all='ignore'):
        return np.broadcast_to(np.asarray(fn(*args), dtype=float), shape)


@dataclass(frozen=True)
class KernelSet:
    """Kernels k_i(x_1, ..., x_i, y_i) of a product operator

    kernels[i] is called with i + 2 broadcastable arguments. factors holds
    (u_i, v_i) when every kernel is rank one, k_i = u_i(x_i) v_i(y_i).
    """
    kernels: Tuple[Callable, ...]
    factors: Optional[Tuple[Tuple[Callable, Callable], ...]] = field(default=None, repr=False)
    sources: Tuple[str, ...] = ()

    @classmethod
    def rank_one(cls, factors: Sequence[Tuple[Callable, Callable]]) -> "KernelSet":
        factors = tuple((u, v) for u, v in factors)
        kernels = tuple(cls._rank_one_kernel(u, v) for u, v in factors)
        return cls(kernels, factors)

    @staticmethod
    def _rank_one_kernel(u: Callable, v: Callable) -> Callable:
        def kernel(*args):
            return np.asarray(u(args[-2]), dtype=float) * np.asarray(v(args[-1]), dtype=float)
        return kernel

    @property
    def ndim(self) -> int:
        return len(self.kernels)

    def level_values(self, i: int, x_prefix: Sequence[float], x_nodes: np.ndarray,
                     y_nodes: np.ndarray) -> np.ndarray:
        """k_i(x_prefix, x, y) as a (len(x_nodes), len(y_nodes)) matrix"""
        values = _evaluate(self.kernels[i], *[float(v) for v in x_prefix],
                           x_nodes[:, None], y_nodes[None, :])
        if not np.all(np.isfinite(values)):
            raise KernelContractError(f"Kernel k_{i + 1} is not finite at prefix {tuple(x_prefix)}")
        if np.any(values < 0):
            k, j = np.unravel_index(int(np.argmin(values)), values.shape)
            raise KernelContractError(f"Kernel k_{i + 1} is negative ({values[k, j]:.3g}) at "
                                      f"x_prefix={tuple(x_prefix)}, x={x_nodes[k]:.6g}, y={y_nodes[j]:.6g}")
        return values

    def check_nonnegative(self, x_grid: ProductGrid, y_grid: ProductGrid, samples: int = 32, seed: int = 0):
        """Sampled check over random node prefixes of the target grid"""
        if self.ndim != x_grid.ndim or self.ndim != y_grid.ndim:
            raise GridError(f"{self.ndim} kernels for a {x_grid.ndim}-D target and {y_grid.ndim}-D source")
        rng = np.random.default_rng(seed)
        for i in range(self.ndim):
            for _ in range(samples if i else 1):
                prefix = [x_grid.axes[k].nodes[rng.integers(x_grid.axes[k].size)] for k in range(i)]
                self.level_values(i, prefix, x_grid.axes[i].nodes, y_grid.axes[i].nodes)


@dataclass(frozen=True)
class SteklovLimits:
    """Variable limits a_i <= b_i of the two-dimensional Hardy-Steklov operator

    Every limit is called as fn(x_1, x_2), so a_1 and b_1 may depend on either
    variable.
    """
    lower: Tuple[Callable, Callable]
    upper: Tuple[Callable, Callable]
    sources: Tuple[str, ...] = ()

    def bounds(self, i: int, x1, x2) -> Tuple[np.ndarray, np.ndarray]:
        a = _evaluate(self.lower[i], x1, x2)
        b = _evaluate(self.upper[i], x1, x2)
        bad = a > b + 1e-12 * np.maximum(1.0, np.abs(b))
        if np.any(bad):
            k = np.unravel_index(int(np.argmax(bad)), bad.shape)
            raise LimitsError(f"a_{i + 1} = {a[k]:.6g} exceeds b_{i + 1} = {b[k]:.6g} "
                              f"at (x1, x2) = ({np.broadcast_to(x1, bad.shape)[k]:.6g}, "
                              f"{np.broadcast_to(x2, bad.shape)[k]:.6g})")
        return a, np.maximum(a, b)

    def validate(self, x_grid: ProductGrid):
        x1, x2 = x_grid.coordinates()
        for i in range(2):
            self.bounds(i, x1, x2)


# ==================== TONELLI CONTRACTION ====================

def _tonelli_contract(values: np.ndarray, level_matrix: Callable, x_shape: Tuple[int, ...]) -> np.ndarray:
    """Nested kernel integration, innermost source variable first

    level_matrix(i, prefix) returns the (target size, source size) matrix of the
    i-th layer with the source weights folded in; prefix holds the target node
    indices of the earlier axes. Each step contracts one source axis of the
    running partial integral.
    """
    n = values.ndim

    def descend(prefix: Tuple[int, ...]) -> np.ndarray:
        # result axes: (y_0, ..., y_{i-1}, x_i, ..., x_{n-1})
        i = len(prefix)
        matrix = level_matrix(i, prefix)
        if i == n - 1:
            return np.tensordot(values, matrix, axes=([n - 1], [1]))
        slabs = [np.tensordot(matrix[j], descend(prefix + (j,)), axes=([0], [i]))
                 for j in range(x_shape[i])]
        return np.stack(slabs, axis=i)

    return descend(())


def _check_anchored(grid: ProductGrid, what: str):
    for i, axis in enumerate(grid.axes):
        if abs(axis.lower) > ANCHOR_TOLERANCE:
            raise GridError(f"{what}: axis {i + 1} starts at {axis.lower}, expected 0")


# ==================== HARDY ====================

def hardy_prefix(values: np.ndarray, grid: ProductGrid) -> np.ndarray:
    """int_0^{x_1} ... int_0^{x_n} f d nu at the nodes

    The plain rule counts a y-node when y_node <= x_node, which takes the whole
    own cell and overshoots by half a cell. Here cells left of a node count
    fully and the node's own cell counts with the fraction lying left of the
    node (one half for midpoints), so the result is exact for functions
    constant on each cell.
    """
    acc = np.asarray(values, dtype=float)
    for i, axis in enumerate(grid.axes):
        cell = acc * _along(axis.weights, i, grid.ndim)
        own = (axis.nodes - axis.edges[:-1]) / axis.widths
        acc = np.cumsum(cell, axis=i) - cell * _along(1.0 - own, i, grid.ndim)
    return acc


def hardy_apply(f: GridFunction, n: Optional[int] = None) -> GridFunction:
    """(H_n f)(x) = (1 / prod x_i) int_0^{x_1} ... int_0^{x_n} f"""
    if n is not None and n != f.grid.ndim:
        raise GridError(f"H_{n} applied to a {f.grid.ndim}-D function")
    _check_anchored(f.grid, "Hardy operator")
    prefix = hardy_prefix(f.masked_values, f.grid)
    volume = np.ones(f.grid.shape)
    for x in f.grid.coordinates():
        volume = volume * x
    return GridFunction(f.grid, prefix / volume, f.grid.full_mask())


def hardy_constant(P: ExponentLike) -> float:
    """Sharp constant prod p_i / (p_i - 1) of H_n on L_P"""
    P = as_exponents(P)
    return float(np.prod([P.hardy_factor(i) for i in range(len(P))]))


def hardy_dilation_apply(fn: Callable, grid: ProductGrid, order: int = 32) -> GridFunction:
    """H_n f through the dilation form int_[0,1]^n f(t_1 x_1, ..., t_n x_n) dt

    Gauss-Legendre on every t axis; holds for Lebesgue measure only.
    """
    _check_anchored(grid, "Hardy dilation form")
    t, w = np.polynomial.legendre.leggauss(int(order))
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    coordinates = grid.coordinates()
    total = np.zeros(grid.shape)
    for index in np.ndindex(*([len(t)] * grid.ndim)):
        weight = float(np.prod(w[list(index)]))
        points = [t[k] * x for k, x in zip(index, coordinates)]
        total += weight * np.broadcast_to(_evaluate(fn, *points), grid.shape)
    return GridFunction(grid, total, grid.full_mask())


# ==================== PRODUCT OPERATOR ====================

def product_apply(kernels: KernelSet, f: GridFunction, target: Optional[ProductGrid] = None,
                  target_mask: Optional[DomainMask] = None) -> GridFunction:
    """(Kf)(x) = int prod k_i(x_1..x_i, y_i) f(y) d nu, nested over y_n, ..., y_1"""
    target_mask = target_mask if target_mask is not None else (target or f.grid).full_mask()
    x_grid = target_mask.grid
    if kernels.ndim != f.grid.ndim or x_grid.ndim != f.grid.ndim:
        raise GridError(f"{kernels.ndim} kernels for a {f.grid.ndim}-D source and {x_grid.ndim}-D target")

    def level_matrix(i, prefix):
        x_prefix = [x_grid.axes[k].nodes[j] for k, j in enumerate(prefix)]
        values = kernels.level_values(i, x_prefix, x_grid.axes[i].nodes, f.grid.axes[i].nodes)
        return values * f.grid.axes[i].weights[None, :]

    result = _tonelli_contract(f.masked_values, level_matrix, x_grid.shape)
    return GridFunction(x_grid, result, target_mask)


def partial_apply(kernels: KernelSet, i: int, g: GridFunction, x_prefix: Sequence[float],
                  x_axis: Axis) -> GridFunction:
    """(K_i g)(x_i) = int k_i(x_prefix, x_i, y_i) g(y_i) d nu_i, layers 0-based"""
    if g.grid.ndim != 1:
        raise GridError("Partial operators act on functions of one variable")
    if len(x_prefix) != i:
        raise GridError(f"K_{i + 1} needs {i} frozen coordinates, got {len(x_prefix)}")
    y_axis = g.grid.axes[0]
    matrix = kernels.level_values(i, x_prefix, x_axis.nodes, y_axis.nodes)
    values = matrix @ (g.masked_values * y_axis.weights)
    grid = ProductGrid((x_axis,))
    return GridFunction(grid, values, grid.full_mask())


# ==================== MULTIPLICATION ====================

def multiplication_apply(f: GridFunction, g: GridFunction) -> GridFunction:
    """(M_g f)(x) = f(x) g(x)"""
    if not f.grid.compatible(g.grid):
        raise GridError("M_g needs f and g on the same grid")
    return GridFunction(f.grid, f.masked_values * g.masked_values, f.mask.intersect(g.mask))


# ==================== HARDY-STEKLOV ====================

def _unit_kernels() -> KernelSet:
    one = lambda *args: np.ones_like(np.asarray(args[-1], dtype=float))
    return KernelSet((one, one))


def steklov_apply(limits: SteklovLimits, kernels: Optional[KernelSet], f: GridFunction,
                  target: Optional[DomainMask] = None) -> GridFunction:
    """int_{a_1}^{b_1} k_1 int_{a_2}^{b_2} k_2 f dy_2 dy_1 for two variables

    Limits are evaluated at the target nodes; a source cell partly inside
    [a_i, b_i] contributes in proportion to the covered length.
    """
    if f.grid.ndim != 2:
        raise GridError("The Hardy-Steklov operator is implemented for two variables")
    kernels = kernels or _unit_kernels()
    target = target if target is not None else f.grid.full_mask()
    x_grid = target.grid
    y1_axis, y2_axis = f.grid.axes
    x1_nodes, x2_nodes = x_grid.axes[0].nodes, x_grid.axes[1].nodes
    values = f.masked_values

    result = np.zeros(x_grid.shape)
    for row, x1 in enumerate(x1_nodes):
        a2, b2 = limits.bounds(1, x1, x2_nodes)
        inner = y2_axis.coverage(a2, b2) * kernels.level_values(1, (x1,), x2_nodes, y2_axis.nodes)
        partial = values @ inner.T  # (y1, x2)
        a1, b1 = limits.bounds(0, x1, x2_nodes)
        outer = y1_axis.coverage(a1, b1) * kernels.level_values(0, (), np.array([x1]), y1_axis.nodes)
        result[row] = np.einsum('jy,yj->j', outer, partial)
    return GridFunction(x_grid, result, target)


def steklov_partial_apply(limits: SteklovLimits, kernels: Optional[KernelSet], i: int,
                          g: GridFunction, x_fixed: float, x_axis: Axis) -> GridFunction:
    """One-variable pieces of the Hardy-Steklov operator

    i = 0: (K_1 g)(x_1) = int_{a_1}^{b_1} k_1(x_1, y) g(y) dy with x_2 = x_fixed
    i = 1: (K_2 g)(x_2) = int_{a_2}^{b_2} k_2(x_1, x_2, y) g(y) dy with x_1 = x_fixed
    """
    if g.grid.ndim != 1:
        raise GridError("Partial operators act on functions of one variable")
    kernels = kernels or _unit_kernels()
    y_axis = g.grid.axes[0]
    x = x_axis.nodes
    if i == 0:
        a, b = limits.bounds(0, x, x_fixed)
        kernel = kernels.level_values(0, (), x, y_axis.nodes)
    elif i == 1:
        a, b = limits.bounds(1, x_fixed, x)
        kernel = kernels.level_values(1, (x_fixed,), x, y_axis.nodes)
    else:
        raise GridError(f"Hardy-Steklov layer {i + 1} does not exist for two variables")
    values = (y_axis.coverage(a, b) * kernel) @ g.masked_values
    grid = ProductGrid((x_axis,))
    return GridFunction(grid, values, grid.full_mask())


# ==================== OPERATOR I ====================

def operator_I_apply(map_: TriangularMap, g: GridFunction, f: GridFunction) -> GridFunction:
    """(If)(x) = (1 / prod psi_i) int_0^{psi_1(x_1)} ... int_0^{psi_n(x)} f g dy"""
    if not f.grid.compatible(map_.codomain.grid):
        raise GridError("f must live on the codomain grid of the map")
    _check_anchored(f.grid, "Operator I")
    x_grid = map_.domain.grid
    psi = [np.broadcast_to(v, x_grid.shape) for v in map_.forward(*x_grid.coordinates())]
    inside = map_.domain.indicator
    for i, values in enumerate(psi):
        bad = inside & ~(values > 0)
        if np.any(bad):
            k = tuple(int(j) for j in np.argwhere(bad)[0])
            raise OperatorDomainError(f"psi_{i + 1} = {values[k]:.6g} <= 0 at node {k}")

    product = multiplication_apply(f, g)

    def level_matrix(i, prefix):
        # psi_i depends on x_1..x_i only
        index = tuple(prefix) + (slice(None),) + (0,) * (x_grid.ndim - i - 1)
        upper = np.maximum(psi[i][index], 0.0)
        return f.grid.axes[i].coverage(0.0, upper)

    integral = _tonelli_contract(product.masked_values, level_matrix, x_grid.shape)
    volume = np.ones(x_grid.shape)
    for values in psi:
        volume = volume * np.where(inside, values, 1.0)
    return GridFunction(x_grid, np.where(inside, integral / volume, 0.0), map_.domain)


def operator_I_pipeline(map_: TriangularMap, g: GridFunction, f: GridFunction) -> GridFunction:
    """C_phi H_n M_g f evaluated stage by stage"""
    return pullback(hardy_apply(multiplication_apply(f, g)), map_)


# ==================== PARTIAL OPERATOR CONSTANTS ====================

def rank_one_partial_constant(u: Callable, v: Callable, x_axis: Axis, y_axis: Axis,
                              p: float, q: float) -> float:
    """||u||_{L_p(mu)} ||v||_{L_q'(nu)}: the exact norm of g -> u(x) int v g d nu"""
    u_values = _evaluate(u, x_axis.nodes)
    v_values = _evaluate(v, y_axis.nodes)
    if not (np.all(np.isfinite(u_values)) and np.all(np.isfinite(v_values))):
        raise KernelContractError("Rank-one factor is not finite on the grid")
    q_conjugate = math.inf if q == 1.0 else q / (q - 1.0)
    return axis_norm(u_values, x_axis, p) * axis_norm(v_values, y_axis, q_conjugate)


class OperatorNormEstimate(NamedTuple):
    value: float
    iterations: int
    converged: bool


def discrete_operator_norm(kernel: np.ndarray, x_axis: Axis, y_axis: Axis, p: float, q: float,
                           tol: float = 1e-12) -> OperatorNormEstimate:
    """Norm of g -> int k(x, y) g(y) d nu from L_q(nu) to L_p(mu) for k >= 0

    q = 1 is exact (largest column norm). Otherwise a nonlinear power
    iteration on nonnegative g; every iterate is a lower bound and the
    iteration converges to the norm when p >= q.
    """
    kernel = np.asarray(kernel, dtype=float)
    if np.any(kernel < 0):
        raise KernelContractError("Power iteration needs a nonnegative kernel")
    mu = x_axis.weights
    nu = y_axis.weights

    if q == 1.0:
        columns = np.sum(kernel ** p * mu[:, None], axis=0) ** (1.0 / p)
        columns = np.where(nu > 0, columns, 0.0)
        return OperatorNormEstimate(float(np.max(columns, initial=0.0)), 0, True)

    def ratio(g):
        image = kernel @ (g * nu)
        top = np.sum(image ** p * mu) ** (1.0 / p)
        bottom = np.sum(g ** q * nu) ** (1.0 / q)
        return top / bottom if bottom > 0 else 0.0

    g = np.where(nu > 0, 1.0, 0.0)
    best = ratio(g)
    for iteration in range(1, POWER_ITERATIONS + 1):
        image = kernel @ (g * nu)
        dual = kernel.T @ (mu * image ** (p - 1.0))
        g_next = dual ** (1.0 / (q - 1.0))
        scale = np.max(g_next, initial=0.0)
        if scale <= 0 or not np.isfinite(scale):
            return OperatorNormEstimate(best, iteration, True)
        g = g_next / scale
        current = ratio(g)
        previous, best = best, max(best, current)
        if abs(current - previous) <= tol * max(best, 1e-300):
            return OperatorNormEstimate(best, iteration, True)
    return OperatorNormEstimate(best, POWER_ITERATIONS, False)


@dataclass
class PartialConstantProfile:
    """Norms of K_i over sampled prefixes (x_1, ..., x_{i-1})"""
    layer: int
    prefixes: np.ndarray
    values: np.ndarray
    converged: bool = True

    @property
    def sup(self) -> float:
        return float(np.max(self.values, initial=0.0))


def partial_constant_profile(kernels: KernelSet, i: int, x_grid: ProductGrid, y_grid: ProductGrid,
                             p: float, q: float, samples: int = 64, seed: int = 0) -> PartialConstantProfile:
    """sup over frozen prefixes of ||K_i|| : L_q -> L_p, estimated slice by slice

    The prefix is taken in the target variables x_1..x_{i-1}, the variables the
    kernel actually reads.
    """
    if not 1.0 <= q:
        raise ExponentError(f"q = {q} is below 1")
    prefix_shape = x_grid.shape[:i]
    total = int(np.prod(prefix_shape)) if i else 1
    if total <= samples:
        indices = list(np.ndindex(*prefix_shape)) if i else [()]
    else:
        rng = np.random.default_rng([seed, i])
        flat = np.sort(rng.choice(total, size=samples, replace=False))
        indices = [tuple(int(k) for k in np.unravel_index(j, prefix_shape)) for j in flat]

    x_axis, y_axis = x_grid.axes[i], y_grid.axes[i]
    prefixes, values, converged = [], [], True
    for index in indices:
        prefix = [x_grid.axes[k].nodes[j] for k, j in enumerate(index)]
        matrix = kernels.level_values(i, prefix, x_axis.nodes, y_axis.nodes)
        estimate = discrete_operator_norm(matrix, x_axis, y_axis, p, q)
        prefixes.append(prefix)
        values.append(estimate.value)
        converged = converged and estimate.converged
    logger.debug("K_%d: %d prefixes, sup norm %.6g", i + 1, len(values), max(values, default=0.0))
    return PartialConstantProfile(i, np.array(prefixes, dtype=float).reshape(len(values), i),
                                  np.array(values), converged)
