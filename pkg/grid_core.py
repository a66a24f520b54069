"""
Grid Core Module
Discretized product measure spaces: axes carrying quadrature weights, product grids,
measurable subsets stored as boolean masks, and functions sampled on the grid
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


# ==================== ERRORS ====================

class MixnormError(Exception):
    """Base class for every error raised by the laboratory"""


class GridError(MixnormError):
    """Bad axis, grid, mask or array shape"""


class IndexOutOfRange(GridError, IndexError):
    """Slice prefix outside the grid"""


def _frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


def _evaluate_weight(weight_fn: Optional[Callable], nodes: np.ndarray) -> np.ndarray:
    """Evaluate a density on the nodes, rejecting non-finite and negative values"""
    if weight_fn is None:
        return np.ones_like(nodes)

    with np.errstate(all='ignore'):
        raw = weight_fn(nodes)
    values = np.broadcast_to(np.asarray(raw, dtype=float), nodes.shape).copy()

    bad = ~np.isfinite(values)
    if bad.any():
        k = int(np.argmax(bad))
        raise GridError(f"Weight is not finite at node {nodes[k]!r} (value {values[k]!r})")
    negative = values < 0
    if negative.any():
        k = int(np.argmax(negative))
        raise GridError(f"Weight is negative at node {nodes[k]!r} (value {values[k]!r})")
    return values


# ==================== AXIS ====================

@dataclass(frozen=True, eq=False)
class Axis:
    """One factor (X_i, mu_i) of the product space, discretized by midpoint cells

    nodes are the cell midpoints, edges the cell boundaries and weights the
    measure carried by each cell.
    """
    nodes: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    label: str = ""
    weight_fn: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        nodes = _frozen_array(self.nodes)
        weights = _frozen_array(self.weights)
        edges = _frozen_array(self.edges)

        if nodes.ndim != 1 or nodes.size == 0:
            raise GridError(f"Axis '{self.label}' needs a non-empty 1-D node array")
        if weights.shape != nodes.shape:
            raise GridError(f"Axis '{self.label}': {weights.size} weights for {nodes.size} nodes")
        if edges.shape != (nodes.size + 1,):
            raise GridError(f"Axis '{self.label}': expected {nodes.size + 1} cell edges, got {edges.size}")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights)) and np.all(np.isfinite(edges))):
            raise GridError(f"Axis '{self.label}' holds non-finite values")
        if np.any(np.diff(nodes) <= 0):
            raise GridError(f"Axis '{self.label}': nodes must be strictly increasing")
        if np.any(np.diff(edges) <= 0):
            raise GridError(f"Axis '{self.label}': cell edges must be strictly increasing")
        if np.any(nodes < edges[:-1]) or np.any(nodes > edges[1:]):
            raise GridError(f"Axis '{self.label}': every node must lie inside its cell")
        if np.any(weights < 0):
            raise GridError(f"Axis '{self.label}': weights must be nonnegative")

        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'edges', edges)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def lower(self) -> float:
        return float(self.edges[0])

    @property
    def upper(self) -> float:
        return float(self.edges[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def measure(self) -> float:
        """Discretized total measure of the axis interval"""
        return float(np.sum(self.weights))

    @property
    def density(self) -> np.ndarray:
        """Cell density weights / widths (the w in d mu = w dx)"""
        return self.weights / self.widths

    def locate(self, points) -> np.ndarray:
        """Index of the cell containing each point (clamped to the axis)"""
        index = np.searchsorted(self.edges, np.asarray(points, dtype=float), side='right') - 1
        return np.clip(index, 0, self.size - 1)

    def spacing_at(self, points) -> np.ndarray:
        return self.widths[self.locate(points)]

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return (points >= self.edges[0]) & (points <= self.edges[-1])

    def density_at(self, points) -> np.ndarray:
        """Density of the axis measure at arbitrary points"""
        points = np.asarray(points, dtype=float)
        if self.weight_fn is not None:
            with np.errstate(all='ignore'):
                raw = self.weight_fn(points)
            return np.broadcast_to(np.asarray(raw, dtype=float), points.shape)
        return np.interp(points, self.nodes, self.density)

    def coverage(self, lower, upper) -> np.ndarray:
        """Measure of [lower, upper] carried by each cell

        Returns an array of shape broadcast(lower, upper) + (size,). A cell only
        partly inside the interval contributes its weight scaled by the covered
        fraction of its length.
        """
        lower = np.asarray(lower, dtype=float)[..., None]
        upper = np.asarray(upper, dtype=float)[..., None]
        left = np.maximum(lower, self.edges[:-1])
        right = np.minimum(upper, self.edges[1:])
        overlap = np.clip(right - left, 0.0, None)
        return overlap / self.widths * self.weights

    def with_label(self, label: str) -> "Axis":
        return Axis(self.nodes, self.weights, self.edges, label, self.weight_fn)


def make_uniform_axis(a: float, b: float, m: int, weight_fn: Optional[Callable] = None,
                      label: str = "") -> Axis:
    """Composite midpoint rule on [a, b] with m cells for d mu = w(x) dx

    m = 1 is allowed and gives a single cell carrying the whole interval.
    """
    a, b, m = float(a), float(b), int(m)
    if not a < b:
        raise GridError(f"Axis '{label}': need a < b, got [{a}, {b}]")
    if m < 1:
        raise GridError(f"Axis '{label}': need at least one cell, got m={m}")

    edges = np.linspace(a, b, m + 1)
    nodes = 0.5 * (edges[:-1] + edges[1:])
    weights = _evaluate_weight(weight_fn, nodes) * np.diff(edges)
    return Axis(nodes, weights, edges, label, weight_fn)


def _graded_edges(length: float, cells: int, first_width: float) -> np.ndarray:
    """Edges 0, h, h*r, h*r^2, ..., length with geometric growth"""
    if cells == 1:
        return np.array([0.0, length])
    if not 0 < first_width < length:
        raise GridError(f"first_width must lie in (0, {length}), got {first_width}")
    return np.concatenate(([0.0], np.geomspace(first_width, length, cells)))


def make_geometric_axis(a: float, b: float, m: int, first_width: float,
                        weight_fn: Optional[Callable] = None, label: str = "") -> Axis:
    """Midpoint cells graded geometrically away from 0

    Used for long truncations of (0, inf) and of R. When a < 0 < b the grading
    is mirrored on both sides of 0; otherwise cells grow away from a.
    """
    a, b, m = float(a), float(b), int(m)
    if not a < b:
        raise GridError(f"Axis '{label}': need a < b, got [{a}, {b}]")
    if m < 1:
        raise GridError(f"Axis '{label}': need at least one cell, got m={m}")

    if a < 0.0 < b:
        if m < 2:
            raise GridError(f"Axis '{label}': a two-sided graded axis needs m >= 2")
        m_left = max(1, int(round(m * (-a) / (b - a))))
        m_left = min(m_left, m - 1)
        left = -_graded_edges(-a, m_left, min(first_width, -a / 2))[::-1]
        right = _graded_edges(b, m - m_left, min(first_width, b / 2))
        edges = np.concatenate((left[:-1], right))
    else:
        edges = a + _graded_edges(b - a, m, first_width)

    nodes = 0.5 * (edges[:-1] + edges[1:])
    weights = _evaluate_weight(weight_fn, nodes) * np.diff(edges)
    return Axis(nodes, weights, edges, label, weight_fn)


def doubling_truncations(b0: float, levels: int) -> List[float]:
    """Truncation radii b0, 2*b0, 4*b0, ... for convergence studies on infinite domains"""
    if levels < 1:
        raise GridError("Need at least one truncation level")
    return [float(b0) * 2.0 ** k for k in range(levels)]


# ==================== PRODUCT GRID ====================

@dataclass(frozen=True, eq=False)
class ProductGrid:
    """Product of axes; the ambient space prod X_i at desk scale"""
    axes: Tuple[Axis, ...]

    def __post_init__(self):
        axes = tuple(self.axes)
        if len(axes) < 1:
            raise GridError("A product grid needs at least one axis")
        object.__setattr__(self, 'axes', axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(axis.size for axis in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Broadcastable (open mesh) node coordinates, one array per axis"""
        return np.ix_(*[axis.nodes for axis in self.axes])

    def dense_coordinates(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.broadcast_to(c, self.shape) for c in self.coordinates())

    def weight_tensor(self) -> np.ndarray:
        """Product measure weight of every node"""
        tensor = np.ones(self.shape)
        for axis_index, axis in enumerate(self.axes):
            tensor = tensor * _along(axis.weights, axis_index, self.ndim)
        return tensor

    def sub_grid(self, start: int) -> "ProductGrid":
        return ProductGrid(self.axes[start:])

    def drop_axis(self, axis_index: int) -> "ProductGrid":
        return ProductGrid(self.axes[:axis_index] + self.axes[axis_index + 1:])

    def compatible(self, other: "ProductGrid") -> bool:
        if self is other:
            return True
        if self.shape != other.shape:
            return False
        return all(np.array_equal(a.nodes, b.nodes) and np.array_equal(a.weights, b.weights)
                   for a, b in zip(self.axes, other.axes))

    def full_mask(self) -> "DomainMask":
        return DomainMask(self, np.ones(self.shape, dtype=bool))


def _along(values: np.ndarray, axis_index: int, ndim: int) -> np.ndarray:
    """Reshape a 1-D array so it broadcasts along one axis of an ndim array"""
    shape = [1] * ndim
    shape[axis_index] = -1
    return np.reshape(values, shape)


# ==================== DOMAIN MASK ====================

@dataclass(frozen=True, eq=False)
class DomainMask:
    """Measurable subset Omega of the product grid as an explicit indicator"""
    grid: ProductGrid
    indicator: np.ndarray

    def __post_init__(self):
        indicator = np.array(self.indicator, dtype=bool)
        if indicator.shape != self.grid.shape:
            raise GridError(f"Mask shape {indicator.shape} does not match grid shape {self.grid.shape}")
        indicator.setflags(write=False)
        object.__setattr__(self, 'indicator', indicator)

    @classmethod
    def full(cls, grid: ProductGrid) -> "DomainMask":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def empty(cls, grid: ProductGrid) -> "DomainMask":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def from_callable(cls, grid: ProductGrid, fn: Callable) -> "DomainMask":
        """Nonzero values of fn(x_1, ..., x_n) mark points of the domain"""
        with np.errstate(all='ignore'):
            raw = fn(*grid.coordinates())
        values = np.broadcast_to(np.asarray(raw, dtype=float), grid.shape)
        return cls(grid, values != 0)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.indicator))

    def slice(self, prefix: Sequence[int]) -> "DomainMask":
        return slice_mask(self, prefix)

    def projection(self, axis_index: int) -> np.ndarray:
        """Indices of axis i hit by the mask: pi_i(Omega)"""
        if not 0 <= axis_index < self.grid.ndim:
            raise IndexOutOfRange(f"Axis {axis_index} outside a {self.grid.ndim}-D grid")
        others = tuple(k for k in range(self.grid.ndim) if k != axis_index)
        return np.any(self.indicator, axis=others) if others else self.indicator.copy()

    def intersect(self, other: "DomainMask") -> "DomainMask":
        if not self.grid.compatible(other.grid):
            raise GridError("Cannot intersect masks on different grids")
        return DomainMask(self.grid, self.indicator & other.indicator)

    def contains_points(self, points: Sequence[np.ndarray]) -> np.ndarray:
        """Membership of arbitrary points: inside the box and nearest cell in the mask"""
        inside = np.ones(np.broadcast_shapes(*(np.shape(p) for p in points)), dtype=bool)
        index = []
        for axis, coordinate in zip(self.grid.axes, points):
            inside = inside & axis.contains(coordinate)
            index.append(axis.locate(coordinate))
        return inside & self.indicator[tuple(index)]


def slice_mask(mask: DomainMask, prefix: Sequence[int]) -> DomainMask:
    """Omega_{x_1..x_k}: points of the remaining axes whose prefix extension lies in Omega"""
    prefix = tuple(int(k) for k in prefix)
    n = mask.grid.ndim
    if len(prefix) >= n:
        raise GridError(f"Prefix of length {len(prefix)} leaves nothing of a {n}-D mask")
    for axis_index, (k, size) in enumerate(zip(prefix, mask.grid.shape)):
        if not 0 <= k < size:
            raise IndexOutOfRange(f"Prefix index {k} outside axis {axis_index} of size {size}")
    return DomainMask(mask.grid.sub_grid(len(prefix)), mask.indicator[prefix])


# ==================== GRID FUNCTION ====================

@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values over the grid; values outside the mask are treated as 0 everywhere"""
    grid: ProductGrid
    values: np.ndarray
    mask: DomainMask

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(f"Values shape {values.shape} does not match grid shape {self.grid.shape}")
        if not self.mask.grid.compatible(self.grid):
            raise GridError("Mask belongs to a different grid")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_callable(cls, grid: ProductGrid, fn: Callable,
                      mask: Optional[DomainMask] = None) -> "GridFunction":
        with np.errstate(all='ignore'):
            raw = fn(*grid.coordinates())
        values = np.broadcast_to(np.asarray(raw, dtype=float), grid.shape)
        return cls(grid, values, mask if mask is not None else grid.full_mask())

    @classmethod
    def constant(cls, grid: ProductGrid, c: float,
                 mask: Optional[DomainMask] = None) -> "GridFunction":
        return cls(grid, np.full(grid.shape, float(c)), mask if mask is not None else grid.full_mask())

    @property
    def masked_values(self) -> np.ndarray:
        return np.where(self.mask.indicator, self.values, 0.0)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values, self.mask)

    def scaled(self, c: float) -> "GridFunction":
        return self.with_values(c * self.values)

    def plus(self, other: "GridFunction") -> "GridFunction":
        if not self.grid.compatible(other.grid):
            raise GridError("Cannot add functions on different grids")
        return GridFunction(self.grid, self.masked_values + other.masked_values,
                            DomainMask(self.grid, self.mask.indicator | other.mask.indicator))

    def slice(self, prefix: Sequence[int]) -> "GridFunction":
        sub_mask = slice_mask(self.mask, prefix)
        return GridFunction(sub_mask.grid, self.values[tuple(int(k) for k in prefix)], sub_mask)

    def esssup(self) -> float:
        """Discrete essential supremum: max |f| over positively weighted mask nodes"""
        support = self.mask.indicator & (self.grid.weight_tensor() > 0)
        if not support.any():
            return 0.0
        return float(np.max(np.abs(self.values[support])))

    def argmax_abs(self) -> Tuple[int, ...]:
        support = self.mask.indicator & (self.grid.weight_tensor() > 0)
        scores = np.where(support, np.abs(self.values), -np.inf)
        return tuple(int(k) for k in np.unravel_index(np.argmax(scores), self.grid.shape))


def integrate(f: GridFunction, axis_index: int) -> GridFunction:
    """One layer of the iterated integral: weighted sum over one axis

    The result lives on the grid with that axis removed; its mask is the
    projection of f's mask along the axis.
    """
    n = f.grid.ndim
    if not 0 <= axis_index < n:
        raise IndexOutOfRange(f"Axis {axis_index} outside a {n}-D grid")
    if n == 1:
        raise GridError("Integrating the only axis leaves a number; use integrate_all")

    weights = _along(f.grid.axes[axis_index].weights, axis_index, n)
    values = np.sum(f.masked_values * weights, axis=axis_index)
    grid = f.grid.drop_axis(axis_index)
    return GridFunction(grid, values, DomainMask(grid, np.any(f.mask.indicator, axis=axis_index)))


def integrate_all(f: GridFunction) -> float:
    return float(np.sum(f.masked_values * f.grid.weight_tensor()))
