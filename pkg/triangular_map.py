"""
Triangular Map Module
Changes of variables phi(x) = (psi_1(x_1), psi_2(x_1, x_2), ...) with layerwise
inverses and Radon-Nikodym derivatives, the composition operator f -> f o phi,
and change-of-variables verification
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from grid_core import Axis, DomainMask, GridError, GridFunction, MixnormError

logger = logging.getLogger(__name__)

SINGULAR_SLOPE = 1e-14
BISECTION_STEPS = 200
MONOTONE_SAMPLES = 64


class MapInvalidError(MixnormError):
    """A layer is not strictly monotone in its last argument"""


class LayerRangeError(MixnormError):
    """Requested value lies outside the range of a layer"""


class SingularJacobianError(MixnormError):
    """|d psi_i / d x_i| vanishes at a point where a density is needed"""


@dataclass(frozen=True)
class MapLayer:
    """psi_i(x_1, ..., x_i) with optional analytic inverse and slope

    inverse takes (x_1, ..., x_{i-1}, y_i) and returns x_i; derivative takes
    (x_1, ..., x_i) and returns d psi_i / d x_i. direction is +1 or -1, or 0 to
    detect it from samples.
    """
    forward: Callable
    inverse: Optional[Callable] = None
    derivative: Optional[Callable] = None
    direction: int = 0
    source: str = ""


class LayerJacobian(NamedTuple):
    """J(psi_i^{-1}(y_1, ..., y_{i-1}, .); y_i) tabulated over the first i+1 axes of Omega'"""
    layer: int
    values: np.ndarray
    valid: np.ndarray

    def expanded(self, ndim: int) -> np.ndarray:
        """Values reshaped to broadcast over an ndim grid"""
        return np.reshape(self.values, self.values.shape + (1,) * (ndim - self.values.ndim))


@dataclass
class CoverageReport:
    """Which nodes of Omega map into Omega'"""
    total: int
    covered: int
    uncovered: np.ndarray = field(repr=False)

    @property
    def fraction(self) -> float:
        return self.covered / self.total if self.total else 1.0

    def to_dict(self) -> dict:
        return {'total': self.total, 'covered': self.covered,
                'uncovered': self.total - self.covered, 'fraction': self.fraction}


def _call(fn: Callable, *args) -> np.ndarray:
    with np.errstate(all='ignore'):
        return np.asarray(fn(*args), dtype=float)


class GeneralMap:
    """Forward-only map whose components may depend on every variable

    Only pullback accepts it; densities need the triangular structure.
    """

    def __init__(self, components: Sequence[Callable], domain: DomainMask, codomain: DomainMask,
                 name: str = ""):
        if len(components) != domain.grid.ndim or codomain.grid.ndim != domain.grid.ndim:
            raise GridError("Map components, domain and codomain must share a dimension")
        self.components = tuple(components)
        self.domain = domain
        self.codomain = codomain
        self.name = name

    @property
    def ndim(self) -> int:
        return len(self.components)

    def forward(self, *coordinates) -> Tuple[np.ndarray, ...]:
        shape = np.broadcast_shapes(*(np.shape(c) for c in coordinates))
        return tuple(np.broadcast_to(_call(fn, *coordinates), shape) for fn in self.components)


class TriangularMap:
    """phi : Omega -> Omega' acting by layers, psi_i strictly monotone in x_i"""

    def __init__(self, layers: Sequence[MapLayer], domain: DomainMask, codomain: DomainMask,
                 name: str = "", validate: bool = True, seed: int = 0):
        if len(layers) != domain.grid.ndim or codomain.grid.ndim != domain.grid.ndim:
            raise GridError("Map layers, domain and codomain must share a dimension")
        self.layers = tuple(layers)
        self.domain = domain
        self.codomain = codomain
        self.name = name
        self.directions = [self._detect_direction(i) for i in range(self.ndim)]
        if validate:
            self.check_monotone(seed=seed)

    @property
    def ndim(self) -> int:
        return len(self.layers)

    def x_axis(self, i: int) -> Axis:
        return self.domain.grid.axes[i]

    def y_axis(self, i: int) -> Axis:
        return self.codomain.grid.axes[i]

    # ---------- forward ----------

    def forward_layer(self, i: int, *x_args) -> np.ndarray:
        shape = np.broadcast_shapes(*(np.shape(a) for a in x_args))
        return np.broadcast_to(_call(self.layers[i].forward, *x_args), shape)

    def forward(self, *coordinates) -> Tuple[np.ndarray, ...]:
        shape = np.broadcast_shapes(*(np.shape(c) for c in coordinates))
        return tuple(np.broadcast_to(self.forward_layer(i, *coordinates[:i + 1]), shape)
                     for i in range(self.ndim))

    # ---------- monotonicity ----------

    def _prefix_samples(self, i: int, count: int, rng: np.random.Generator) -> List[np.ndarray]:
        return [rng.uniform(self.x_axis(k).lower, self.x_axis(k).upper, size=(count, 1)) for k in range(i)]

    def _detect_direction(self, i: int) -> int:
        declared = self.layers[i].direction
        if declared:
            return 1 if declared > 0 else -1
        axis = self.x_axis(i)
        prefix = [np.array([[0.5 * (self.x_axis(k).lower + self.x_axis(k).upper)]]) for k in range(i)]
        ends = self.forward_layer(i, *prefix, np.array([[axis.lower, axis.upper]]))
        return 1 if ends[0, 1] >= ends[0, 0] else -1

    def check_monotone(self, samples: int = 16, seed: int = 0):
        """Sampled check that every psi_i is strictly monotone in its last argument"""
        rng = np.random.default_rng(seed)
        for i in range(self.ndim):
            prefix = self._prefix_samples(i, samples, rng)
            self._check_slice_monotone(i, prefix)

    def _check_slice_monotone(self, i: int, x_prefix: Sequence[np.ndarray]):
        axis = self.x_axis(i)
        grid = np.linspace(axis.lower, axis.upper, MONOTONE_SAMPLES)[None, :]
        values = self.forward_layer(i, *x_prefix, grid)
        steps = np.diff(values, axis=-1) * self.directions[i]
        if not np.all(np.isfinite(values)) or np.any(steps <= 0):
            raise MapInvalidError(f"Layer {i + 1} ({self.layers[i].source or 'closure'}) "
                                  f"is not strictly monotone in x_{i + 1}")

    # ---------- inversion ----------

    def solve_layer(self, i: int, x_prefix: Sequence[np.ndarray], y) -> Tuple[np.ndarray, np.ndarray]:
        """x_i with psi_i(x_prefix, x_i) = y, and a flag marking y inside the layer's range"""
        y = np.asarray(y, dtype=float)
        axis = self.x_axis(i)
        shape = np.broadcast_shapes(*(np.shape(a) for a in x_prefix), y.shape)
        lower = np.full(shape, axis.lower)
        upper = np.full(shape, axis.upper)

        f_lower = self.forward_layer(i, *x_prefix, lower)
        f_upper = self.forward_layer(i, *x_prefix, upper)
        low_value = np.minimum(f_lower, f_upper)
        high_value = np.maximum(f_lower, f_upper)
        slack = 1e-12 * np.maximum(1.0, np.abs(high_value))
        in_range = (y >= low_value - slack) & (y <= high_value + slack)

        layer = self.layers[i]
        if layer.inverse is not None:
            x = np.broadcast_to(_call(layer.inverse, *x_prefix, y), shape)
            return np.clip(x, axis.lower, axis.upper), in_range

        increasing = self.directions[i] > 0
        for _ in range(BISECTION_STEPS):
            middle = 0.5 * (lower + upper)
            value = self.forward_layer(i, *x_prefix, middle)
            go_right = (value < y) if increasing else (value > y)
            lower = np.where(go_right, middle, lower)
            upper = np.where(go_right, upper, middle)
            if np.all(upper - lower <= 4e-16 * np.maximum(1.0, np.abs(middle))):
                break
        return 0.5 * (lower + upper), in_range

    def inverse_chain(self, y_prefix: Sequence[np.ndarray]) -> Tuple[List[np.ndarray], np.ndarray]:
        """Invert layers 1..k for y_1..y_k; returns x_1..x_k and a joint range flag"""
        xs: List[np.ndarray] = []
        valid = np.array(True)
        for i, y in enumerate(y_prefix):
            x, ok = self.solve_layer(i, xs, y)
            xs.append(x)
            valid = valid & ok
        return xs, valid

    # ---------- densities ----------

    def slope(self, i: int, x_args: Sequence[np.ndarray]) -> np.ndarray:
        """d psi_i / d x_i, analytic when given, else a central difference

        The difference step is half the local spacing of the x_i axis.
        """
        layer = self.layers[i]
        shape = np.broadcast_shapes(*(np.shape(a) for a in x_args))
        if layer.derivative is not None:
            return np.broadcast_to(_call(layer.derivative, *x_args), shape)
        x_i = np.asarray(x_args[-1], dtype=float)
        h = 0.5 * self.x_axis(i).spacing_at(x_i)
        prefix = list(x_args[:-1])
        ahead = self.forward_layer(i, *prefix, x_i + h)
        behind = self.forward_layer(i, *prefix, x_i - h)
        return np.broadcast_to((ahead - behind) / (2.0 * h), shape)

    def layer_density(self, i: int, x_prefix: Sequence[np.ndarray], y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """J for layer i at y given the already inverted prefix

        J = w_x(x_i) / (w_y(y_i) |d psi_i / d x_i|) at x_i = psi_i^{-1}(x_prefix, y).
        Returns (J, x_i, in_range); J is 0 where y has no preimage.
        """
        x, in_range = self.solve_layer(i, x_prefix, y)
        slope = np.abs(self.slope(i, list(x_prefix) + [x]))
        singular = in_range & (slope < SINGULAR_SLOPE)
        if np.any(singular):
            where = np.argwhere(np.broadcast_to(singular, singular.shape))[0]
            raise SingularJacobianError(f"Layer {i + 1} has |d psi/d x| < {SINGULAR_SLOPE} "
                                        f"near index {tuple(int(k) for k in where)}")
        with np.errstate(all='ignore'):
            density = self.x_axis(i).density_at(x) / (self.y_axis(i).density_at(y) * slope)
        density = np.where(in_range & np.isfinite(density), density, 0.0)
        return density, x, in_range


# ==================== OPERATIONS ====================

def invert_layer(map_: TriangularMap, i: int, y_prefix: Sequence[float], y_i: float) -> float:
    """x_i with psi_i(x_1, ..., x_{i-1}, x_i) = y_i, the prefix obtained by inverting y_prefix

    Layers are 0-based here: i = 0 is psi_1.
    """
    if len(y_prefix) != i:
        raise GridError(f"Layer {i + 1} needs a prefix of {i} values, got {len(y_prefix)}")
    xs = []
    for k, y in enumerate(list(y_prefix) + [y_i]):
        prefix = [np.array([[x]]) for x in xs]
        map_._check_slice_monotone(k, prefix)
        x, ok = map_.solve_layer(k, [np.asarray(v) for v in xs], np.asarray(float(y)))
        if not bool(ok):
            raise LayerRangeError(f"y_{k + 1} = {y} lies outside the range of layer {k + 1}")
        xs.append(float(x))
    return xs[-1]


def layer_jacobian(map_: TriangularMap, i: int, y_point: Sequence[float]) -> float:
    """Radon-Nikodym derivative of layer i (0-based) at a point of Omega'"""
    ys = [np.asarray(float(v)) for v in y_point[:i + 1]]
    xs, valid = map_.inverse_chain(ys[:i])
    if not bool(valid):
        raise LayerRangeError(f"Prefix {tuple(y_point[:i])} has no preimage")
    density, _, in_range = map_.layer_density(i, xs, ys[i])
    if not bool(in_range):
        raise LayerRangeError(f"y_{i + 1} = {float(ys[i])} lies outside the range of layer {i + 1}")
    return float(density)


def tabulate_jacobians(map_: TriangularMap) -> List[LayerJacobian]:
    """Every layer density on the nodes of Omega'"""
    ys = np.ix_(*[axis.nodes for axis in map_.codomain.grid.axes])
    ndim = map_.ndim
    tables = []
    xs: List[np.ndarray] = []
    valid = np.array(True)
    for i in range(ndim):
        # first i+1 coordinates, dropping the trailing broadcast axes
        y_i = np.reshape(ys[i], ys[i].shape[:i + 1])
        prefix = [np.reshape(x, x.shape + (1,)) for x in xs]
        density, x_i, in_range = map_.layer_density(i, prefix, y_i)
        valid = np.reshape(valid, np.shape(valid) + (1,)) & in_range if i else in_range
        shape = tuple(axis.size for axis in map_.codomain.grid.axes[:i + 1])
        tables.append(LayerJacobian(i, np.broadcast_to(density, shape).copy(), np.broadcast_to(valid, shape).copy()))
        xs = [np.broadcast_to(x, shape) for x in prefix] + [np.broadcast_to(x_i, shape)]
    return tables


def jacobian_product(map_: TriangularMap, P: Sequence[float],
                     tables: Optional[List[LayerJacobian]] = None) -> np.ndarray:
    """prod_i J_i^{1/p_i} over Omega' nodes, 0 outside the image or the mask"""
    tables = tables or tabulate_jacobians(map_)
    ndim = map_.ndim
    product = np.ones(map_.codomain.grid.shape)
    valid = np.ones(map_.codomain.grid.shape, dtype=bool)
    for table, p in zip(tables, P):
        product = product * table.expanded(ndim) ** (1.0 / float(p))
        valid = valid & np.reshape(table.valid, table.valid.shape + (1,) * (ndim - table.valid.ndim))
    return np.where(valid & map_.codomain.indicator, product, 0.0)


def pullback_with_coverage(f: GridFunction, map_: Union[TriangularMap, GeneralMap]) -> Tuple[GridFunction, CoverageReport]:
    """(f o phi) on Omega by multilinear interpolation, plus the coverage report

    Nodes whose image falls outside Omega' get the value 0 and are flagged.
    """
    if not f.grid.compatible(map_.codomain.grid):
        raise GridError("f must live on the codomain grid of the map")
    if any(axis.size < 2 for axis in f.grid.axes):
        raise GridError("Multilinear interpolation needs at least two nodes per axis")

    x_grid = map_.domain.grid
    images = map_.forward(*x_grid.coordinates())
    images = [np.broadcast_to(y, x_grid.shape) for y in images]

    covered = map_.codomain.contains_points(images) & map_.domain.indicator
    clipped = np.stack([np.clip(y, axis.nodes[0], axis.nodes[-1])
                        for y, axis in zip(images, f.grid.axes)], axis=-1)
    interpolator = RegularGridInterpolator(tuple(axis.nodes for axis in f.grid.axes),
                                           f.masked_values, method='linear')
    values = np.where(covered, interpolator(clipped), 0.0)

    total = map_.domain.count
    report = CoverageReport(total, int(np.count_nonzero(covered)), map_.domain.indicator & ~covered)
    if report.covered < total:
        logger.info("Pullback: %d of %d domain nodes map outside the codomain", total - report.covered, total)
    return GridFunction(x_grid, values, map_.domain), report


def pullback(f: GridFunction, map_: Union[TriangularMap, GeneralMap]) -> GridFunction:
    """Composition operator C_phi f = f o phi"""
    return pullback_with_coverage(f, map_)[0]


def compose_callable(fn: Callable, map_: Union[TriangularMap, GeneralMap]) -> GridFunction:
    """f o phi evaluated exactly at the images of the domain nodes"""
    x_grid = map_.domain.grid
    images = [np.broadcast_to(y, x_grid.shape) for y in map_.forward(*x_grid.coordinates())]
    covered = map_.codomain.contains_points(images) & map_.domain.indicator
    with np.errstate(all='ignore'):
        raw = np.broadcast_to(np.asarray(fn(*images), dtype=float), x_grid.shape)
    return GridFunction(x_grid, np.where(covered, raw, 0.0), map_.domain)


class ChangeOfVariables(NamedTuple):
    lhs: float
    rhs: float

    @property
    def relative_gap(self) -> float:
        scale = max(abs(self.rhs), 1e-300)
        return abs(self.lhs - self.rhs) / scale


def _as_callable(g, axis: Axis) -> Callable:
    if isinstance(g, GridFunction):
        if g.grid.ndim != 1:
            raise GridError("Change of variables takes a function of one variable")
        nodes = g.grid.axes[0].nodes
        values = g.masked_values
        return lambda y: np.interp(y, nodes, values)
    return g


def layer_change_of_variables_check(g, map_: TriangularMap, i: int, x_prefix: Sequence[float],
                                    interval: Tuple[float, float]) -> ChangeOfVariables:
    """Both sides of the change of variables for layer i with x_1..x_{i-1} frozen

    lhs = int over psi_i^{-1}(x_prefix, E) of g(psi_i(x_prefix, x_i)) d mu_i
    rhs = int over E of g(y_i) J d nu_i, with the density taken at y_prefix = phi(x_prefix)
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo <= hi:
        raise GridError(f"Interval [{lo}, {hi}] is reversed")
    prefix = [np.asarray(float(v)) for v in x_prefix]
    if len(prefix) != i:
        raise GridError(f"Layer {i + 1} needs {i} frozen coordinates, got {len(prefix)}")

    x_axis = map_.x_axis(i)
    y_axis = map_.y_axis(i)
    g_fn = _as_callable(g, y_axis)

    ends, ok = map_.solve_layer(i, prefix, np.array([lo, hi]))
    if not np.all(ok):
        raise LayerRangeError(f"[{lo}, {hi}] is not inside the range of layer {i + 1}")
    x_lo, x_hi = float(np.min(ends)), float(np.max(ends))

    images = map_.forward_layer(i, *prefix, x_axis.nodes)
    with np.errstate(all='ignore'):
        lhs_values = np.asarray(g_fn(images), dtype=float) * np.ones_like(images)
    lhs = float(np.sum(x_axis.coverage(x_lo, x_hi) * lhs_values))

    density, _, _ = map_.layer_density(i, prefix, y_axis.nodes)
    with np.errstate(all='ignore'):
        rhs_values = np.asarray(g_fn(y_axis.nodes), dtype=float) * density
    rhs = float(np.sum(y_axis.coverage(lo, hi) * rhs_values))
    return ChangeOfVariables(lhs, rhs)


def change_of_variables_check(g, map_: TriangularMap, interval: Tuple[float, float]) -> ChangeOfVariables:
    """Change of variables for the first layer psi_1"""
    return layer_change_of_variables_check(g, map_, 0, (), interval)


def preimage_measure_check(map_: TriangularMap, i: int, x_prefix: Sequence[float],
                           interval: Tuple[float, float]) -> ChangeOfVariables:
    """lhs = mu_i(psi_i^{-1}(x_prefix, E)), rhs = int_E J d nu_i (the defining property of J)"""
    return layer_change_of_variables_check(lambda y: np.ones_like(np.asarray(y, dtype=float)),
                                           map_, i, x_prefix, interval)


def identity_map(domain: DomainMask, codomain: Optional[DomainMask] = None) -> TriangularMap:
    n = domain.grid.ndim
    layers = [MapLayer(forward=(lambda *xs: xs[-1]), inverse=(lambda *args: args[-1]),
                       derivative=(lambda *xs: np.ones_like(np.asarray(xs[-1], dtype=float))),
                       direction=1, source=f"x{k + 1}")
              for k in range(n)]
    return TriangularMap(layers, domain, codomain or domain, name="identity")
