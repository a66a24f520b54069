"""
Norm Laboratory Module
Closed-form operator norms (composition, multiplication, operator I), empirical
lower bounds by ratio maximization over seeded test-function families, and
truncation probes for unbounded compositions
"""

import itertools
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from grid_core import (DomainMask, GridError, GridFunction, MixnormError, ProductGrid,
                       make_geometric_axis)
from mixed_norm import ExponentLike, as_exponents, mixed_norm
from operators import (KernelSet, SteklovLimits, hardy_apply, hardy_constant, operator_I_apply,
                       partial_constant_profile, product_apply, rank_one_partial_constant,
                       multiplication_apply, steklov_apply)
from triangular_map import (SingularJacobianError, TriangularMap, compose_callable,
                            jacobian_product, pullback)

logger = logging.getLogger(__name__)

SOUNDNESS_TOLERANCE = 1e-2
LAYER_RADII = (0.5, 2.0, 4.0)
ASCENT_SIGMA = 0.5
STRATEGIES = ('random', 'layered', 'ascent')


class InvariantViolation(MixnormError):
    """A sampled ratio exceeded a proven operator norm"""


# ==================== NORM FORMULAS ====================

class FormulaResult(NamedTuple):
    """Discrete esssup over Omega' nodes plus its value after polishing inside the argmax cell"""
    value: float
    grid_value: float
    argmax: Tuple[int, ...]
    point: Tuple[float, ...]


def _point_jacobian_product(map_: TriangularMap, P, y: Sequence[float]) -> Optional[float]:
    """prod J_i^{1/p_i} at one point of Omega', None when the point is not admissible"""
    ys = [np.asarray(float(v)) for v in y]
    if not bool(map_.codomain.contains_points(ys)):
        return None
    xs: List[np.ndarray] = []
    product = 1.0
    try:
        for i, p in enumerate(P):
            density, x, ok = map_.layer_density(i, xs, ys[i])
            if not bool(ok):
                return None
            product *= float(density) ** (1.0 / float(p))
            xs.append(x)
    except SingularJacobianError:
        return None
    if not bool(map_.domain.contains_points(xs)):
        return None
    return product


def _polish(objective: Callable, grid: ProductGrid, argmax: Tuple[int, ...],
            start_value: float) -> Tuple[float, Tuple[float, ...]]:
    """Bounded local maximization of objective inside the cell of the argmax node"""
    bounds = [(float(axis.edges[k]), float(axis.edges[k + 1])) for axis, k in zip(grid.axes, argmax)]
    center = tuple(float(axis.nodes[k]) for axis, k in zip(grid.axes, argmax))
    best_value, best_point = start_value, center

    for corner in itertools.product(*bounds):
        value = objective(corner)
        if value is not None and value > best_value:
            best_value, best_point = value, tuple(corner)

    def negative(y):
        value = objective(y)
        return -(value if value is not None else 0.0)

    result = minimize(negative, np.array(best_point), method='L-BFGS-B', bounds=bounds)
    candidate = objective(result.x)
    if candidate is not None and candidate > best_value:
        best_value, best_point = candidate, tuple(float(v) for v in result.x)
    return best_value, best_point


def _positive_support(mask: DomainMask) -> np.ndarray:
    return mask.indicator & (mask.grid.weight_tensor() > 0)


def composition_norm_details(map_: TriangularMap, P: ExponentLike, polish: bool = True) -> FormulaResult:
    P = as_exponents(P)
    if len(P) != map_.ndim:
        raise GridError(f"{len(P)} exponents for a {map_.ndim}-D map")
    table = np.where(_positive_support(map_.codomain), jacobian_product(map_, P), 0.0)
    argmax = tuple(int(k) for k in np.unravel_index(int(np.argmax(table)), table.shape))
    grid_value = float(table[argmax])
    point = tuple(float(axis.nodes[k]) for axis, k in zip(map_.codomain.grid.axes, argmax))
    value = grid_value
    if polish and grid_value > 0:
        value, point = _polish(lambda y: _point_jacobian_product(map_, P, y),
                               map_.codomain.grid, argmax, grid_value)
    return FormulaResult(value, grid_value, argmax, point)


def composition_norm_formula(map_: TriangularMap, P: ExponentLike, polish: bool = True) -> float:
    """||C_phi|| on L_P: esssup over Omega' of prod_i J(psi_i^{-1}; y_i)^{1/p_i}"""
    return composition_norm_details(map_, P, polish).value


def multiplication_norm_formula(g: GridFunction) -> float:
    """||M_g|| = esssup |g|"""
    return g.esssup()


def operator_I_norm_details(map_: TriangularMap, g: GridFunction, P: ExponentLike,
                            g_fn: Optional[Callable] = None, polish: bool = True) -> FormulaResult:
    P = as_exponents(P)
    constant = hardy_constant(P)
    if not g.grid.compatible(map_.codomain.grid):
        raise GridError("g must live on the codomain grid of the map")
    table = np.abs(g.masked_values) * constant * jacobian_product(map_, P)
    table = np.where(_positive_support(map_.codomain), table, 0.0)
    argmax = tuple(int(k) for k in np.unravel_index(int(np.argmax(table)), table.shape))
    grid_value = float(table[argmax])
    point = tuple(float(axis.nodes[k]) for axis, k in zip(map_.codomain.grid.axes, argmax))
    value = grid_value
    if polish and g_fn is not None and grid_value > 0:
        def objective(y):
            product = _point_jacobian_product(map_, P, y)
            if product is None:
                return None
            with np.errstate(all='ignore'):
                g_value = float(np.abs(np.asarray(g_fn(*y), dtype=float)))
            return g_value * constant * product if math.isfinite(g_value) else None
        value, point = _polish(objective, map_.codomain.grid, argmax, grid_value)
    return FormulaResult(value, grid_value, argmax, point)


def operator_I_norm_formula(map_: TriangularMap, g: GridFunction, P: ExponentLike,
                            g_fn: Optional[Callable] = None, polish: bool = True) -> float:
    """||I|| = esssup over Omega' of |g(y)| prod_i (p_i/(p_i-1)) J(psi_i^{-1}; y_i)^{1/p_i}"""
    return operator_I_norm_details(map_, g, P, g_fn, polish).value


class ProductBound(NamedTuple):
    value: float
    constants: Tuple[float, ...]
    exact: bool


def product_kernel_bound(kernels: KernelSet, x_grid: ProductGrid, y_grid: ProductGrid,
                          P: ExponentLike, Q: ExponentLike, samples: int = 64, seed: int = 0) -> ProductBound:
    """prod C_i for K : L_Q -> L_P from the partial operator norms

    Rank-one kernels give C_i exactly; other kernels fall back to the
    power-iteration estimate over sampled prefixes.
    """
    P, Q = as_exponents(P), as_exponents(Q)
    if kernels.factors is not None:
        constants = tuple(rank_one_partial_constant(u, v, x_grid.axes[i], y_grid.axes[i], P[i], Q[i])
                          for i, (u, v) in enumerate(kernels.factors))
        return ProductBound(float(np.prod(constants)), constants, True)
    profiles = [partial_constant_profile(kernels, i, x_grid, y_grid, P[i], Q[i], samples, seed)
                for i in range(kernels.ndim)]
    constants = tuple(profile.sup for profile in profiles)
    return ProductBound(float(np.prod(constants)), constants, False)


# ==================== OPERATOR HANDLES ====================

class OperatorHandle(ABC):
    """An operator from functions on source (Omega') to functions on target (Omega)"""
    kind = "operator"

    def __init__(self, source: DomainMask, target: DomainMask):
        self.source = source
        self.target = target

    @abstractmethod
    def apply(self, f: GridFunction) -> GridFunction:
        ...

    def apply_callable(self, fn: Callable) -> GridFunction:
        return self.apply(GridFunction.from_callable(self.source.grid, fn, self.source))

    def formula(self, P: ExponentLike, Q: ExponentLike) -> Optional[float]:
        """Proven norm (or upper bound) for L_Q -> L_P, None when no formula applies"""
        return None

    def hints(self, P: ExponentLike, Q: ExponentLike) -> List[Tuple[int, ...]]:
        """Source nodes where extremal test functions should concentrate"""
        return []

    def describe(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'source_shape': list(self.source.grid.shape),
                'target_shape': list(self.target.grid.shape)}


def _same_exponents(P, Q) -> bool:
    return tuple(as_exponents(P)) == tuple(as_exponents(Q))


class IdentityHandle(OperatorHandle):
    kind = "identity"

    def __init__(self, mask: DomainMask):
        super().__init__(mask, mask)

    def apply(self, f: GridFunction) -> GridFunction:
        return f

    def formula(self, P, Q):
        return 1.0 if _same_exponents(P, Q) else None


class CompositionHandle(OperatorHandle):
    """C_phi f = f o phi for a triangular or general map"""
    kind = "composition"

    def __init__(self, map_, polish: bool = True):
        super().__init__(map_.codomain, map_.domain)
        self.map = map_
        self.polish = polish
        self._details: Dict[Tuple[float, ...], FormulaResult] = {}

    def apply(self, f: GridFunction) -> GridFunction:
        return pullback(f, self.map)

    def apply_callable(self, fn: Callable) -> GridFunction:
        return compose_callable(fn, self.map)

    def details(self, P) -> Optional[FormulaResult]:
        if not isinstance(self.map, TriangularMap):
            return None
        key = tuple(as_exponents(P))
        if key not in self._details:
            self._details[key] = composition_norm_details(self.map, key, self.polish)
        return self._details[key]

    def formula(self, P, Q):
        if not _same_exponents(P, Q):
            return None
        result = self.details(P)
        return None if result is None else result.value

    def hints(self, P, Q):
        result = self.details(P) if _same_exponents(P, Q) else None
        return [result.argmax] if result is not None else []


class HardyHandle(OperatorHandle):
    kind = "hardy"

    def __init__(self, mask: DomainMask):
        super().__init__(mask, mask.grid.full_mask())

    def apply(self, f: GridFunction) -> GridFunction:
        return hardy_apply(f)

    def formula(self, P, Q):
        if not _same_exponents(P, Q) or min(as_exponents(P)) <= 1.0:
            return None
        return hardy_constant(P)


class ProductHandle(OperatorHandle):
    kind = "product"

    def __init__(self, kernels: KernelSet, source: DomainMask, target: DomainMask):
        super().__init__(source, target)
        self.kernels = kernels
        kernels.check_nonnegative(target.grid, source.grid)

    def apply(self, f: GridFunction) -> GridFunction:
        return product_apply(self.kernels, f, target_mask=self.target)

    def bound(self, P, Q) -> ProductBound:
        return product_kernel_bound(self.kernels, self.target.grid, self.source.grid, P, Q)

    def formula(self, P, Q):
        if self.kernels.factors is None:
            return None
        return self.bound(P, Q).value


class MultiplicationHandle(OperatorHandle):
    kind = "multiplication"

    def __init__(self, g: GridFunction):
        super().__init__(g.mask, g.mask)
        self.g = g

    def apply(self, f: GridFunction) -> GridFunction:
        return multiplication_apply(f, self.g)

    def formula(self, P, Q):
        return multiplication_norm_formula(self.g) if _same_exponents(P, Q) else None

    def hints(self, P, Q):
        return [self.g.argmax_abs()]


class SteklovHandle(OperatorHandle):
    kind = "steklov"

    def __init__(self, limits: SteklovLimits, kernels: Optional[KernelSet], source: DomainMask,
                 target: DomainMask):
        super().__init__(source, target)
        self.limits = limits
        self.kernels = kernels
        limits.validate(target.grid)

    def apply(self, f: GridFunction) -> GridFunction:
        return steklov_apply(self.limits, self.kernels, f, self.target)


class OperatorIHandle(OperatorHandle):
    """I = C_phi H_n M_g"""
    kind = "operator_I"

    def __init__(self, map_: TriangularMap, g: GridFunction, g_fn: Optional[Callable] = None,
                 polish: bool = True):
        super().__init__(map_.codomain, map_.domain)
        self.map = map_
        self.g = g
        self.g_fn = g_fn
        self.polish = polish
        self._details: Dict[Tuple[float, ...], FormulaResult] = {}

    def apply(self, f: GridFunction) -> GridFunction:
        return operator_I_apply(self.map, self.g, f)

    def details(self, P) -> FormulaResult:
        key = tuple(as_exponents(P))
        if key not in self._details:
            self._details[key] = operator_I_norm_details(self.map, self.g, key, self.g_fn, self.polish)
        return self._details[key]

    def formula(self, P, Q):
        if not _same_exponents(P, Q) or min(as_exponents(P)) <= 1.0:
            return None
        return self.details(P).value

    def hints(self, P, Q):
        return [self.details(P).argmax] if self.formula(P, Q) is not None else []


# ==================== TEST FUNCTION FAMILIES ====================

def _bump(size: int, center: int, radius: float) -> np.ndarray:
    """cos^2 bump in index space; radius below 1 selects the single center node"""
    distance = np.abs(np.arange(size) - center).astype(float)
    return np.where(distance < radius, np.cos(0.5 * np.pi * distance / radius) ** 2, 0.0)


def _outer(factors: Sequence[np.ndarray]) -> np.ndarray:
    result = factors[0]
    for factor in factors[1:]:
        result = np.multiply.outer(result, factor)
    return result


def random_member(mask: DomainMask, seed: int, index: int) -> Tuple[np.ndarray, Dict[str, Any]]:
    """Nonnegative mixture of 1 to 3 bumps; member index depends only on (seed, index)"""
    rng = np.random.default_rng([seed, 0, index])
    nodes = np.flatnonzero(mask.indicator)
    shape = mask.grid.shape
    count = int(rng.integers(1, 4))
    values = np.zeros(shape)
    for _ in range(count):
        center = np.unravel_index(int(nodes[rng.integers(nodes.size)]), shape)
        radii = [math.exp(rng.uniform(math.log(0.5), math.log(max(1.0, size / 4.0)))) for size in shape]
        amplitude = rng.uniform(0.1, 1.0)
        values = values + amplitude * _outer([_bump(size, c, r) for size, c, r in zip(shape, center, radii)])
    return np.where(mask.indicator, values, 0.0), {'member': index, 'bumps': count}


class LayeredFamily:
    """chi_B(y_1) g_{y_1}(y~) with unit L_Q~ norm slices, centered at candidate nodes

    Hint nodes come first, then a seeded permutation of every mask node; each
    center is tried with every radius in LAYER_RADII.
    """

    def __init__(self, mask: DomainMask, Q, seed: int, hints: Sequence[Tuple[int, ...]] = ()):
        self.mask = mask
        self.Q = as_exponents(Q)
        shape = mask.grid.shape
        order = np.random.default_rng([seed, 1]).permutation(np.flatnonzero(mask.indicator))
        seen = set()
        centers = []
        for center in list(hints) + [np.unravel_index(int(k), shape) for k in order]:
            key = tuple(int(c) for c in center)
            if key not in seen and mask.indicator[key]:
                seen.add(key)
                centers.append(key)
        self.centers = centers

    def __len__(self):
        return len(self.centers) * len(LAYER_RADII)

    def member(self, index: int) -> Tuple[np.ndarray, Dict[str, Any]]:
        center = self.centers[(index // len(LAYER_RADII)) % len(self.centers)]
        radius = LAYER_RADII[index % len(LAYER_RADII)]
        shape = self.mask.grid.shape
        first = (np.abs(np.arange(shape[0]) - center[0]) < radius).astype(float)
        params = {'center': list(center), 'radius': radius}
        if len(shape) == 1:
            return np.where(self.mask.indicator, first, 0.0), params

        slice_values = _outer([_bump(size, c, radius) for size, c in zip(shape[1:], center[1:])])
        tail = self.Q.tail()
        values = np.zeros(shape)
        for k in np.flatnonzero(first):
            slice_mask = self.mask.slice((int(k),))
            g = GridFunction(slice_mask.grid, slice_values, slice_mask)
            norm = mixed_norm(g, tail)
            if norm > 0:
                values[k] = g.masked_values / norm
        return values, params


# ==================== EMPIRICAL NORM ====================

@dataclass
class Witness:
    family: str
    params: Dict[str, Any]
    ratio: float


@dataclass
class NormReport:
    """Formula value against the best sampled ratio ||Tf||_P / ||f||_Q"""
    operator: str
    P: Tuple[float, ...]
    Q: Tuple[float, ...]
    formula_value: Optional[float]
    grid_formula_value: Optional[float]
    empirical_lower: float
    witness: Optional[Witness]
    samples: int
    seed: int
    strategy: str
    tolerance: float = SOUNDNESS_TOLERANCE
    refinement_trace: List[Tuple[int, float]] = field(default_factory=list)
    violations: List[Witness] = field(default_factory=list)

    @property
    def sound(self) -> bool:
        return not self.violations

    def require_sound(self):
        if self.violations:
            worst = max(self.violations, key=lambda w: w.ratio)
            raise InvariantViolation(f"{len(self.violations)} sampled ratios exceed the {self.operator} "
                                     f"norm {self.formula_value:.6g}; worst {worst.ratio:.6g} "
                                     f"from {worst.family} {worst.params}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['P'] = list(self.P)
        data['Q'] = list(self.Q)
        data['formula_value'] = self.formula_value if self.formula_value is not None else "not applicable"
        data['refinement_trace'] = [{'grid_size': size, 'estimate': value}
                                    for size, value in self.refinement_trace]
        data['sound'] = self.sound
        return data


def parse_strategy(strategy: str) -> List[str]:
    """'random', 'layered', 'ascent', combinations joined by '+', or 'all'"""
    if strategy == 'all':
        return list(STRATEGIES)
    names = [part.strip() for part in strategy.split('+') if part.strip()]
    unknown = [name for name in names if name not in STRATEGIES]
    if unknown or not names:
        raise MixnormError(f"Unknown estimation strategy '{strategy}' (use {', '.join(STRATEGIES)}, "
                           f"a '+' combination or 'all')")
    return [name for name in STRATEGIES if name in names]


class _Search:
    """Running maximum over evaluated test functions"""

    def __init__(self, op: OperatorHandle, P, Q, formula: Optional[float], tolerance: float):
        self.op = op
        self.P = P
        self.Q = Q
        self.formula = formula
        self.tolerance = tolerance
        self.best: Optional[Witness] = None
        self.best_values: Optional[np.ndarray] = None
        self.samples = 0
        self.violations: List[Witness] = []

    def ratio(self, values: np.ndarray) -> Optional[float]:
        f = GridFunction(self.op.source.grid, values, self.op.source)
        denominator = mixed_norm(f, self.Q)
        if denominator <= 0:
            return None
        return mixed_norm(self.op.apply(f), self.P) / denominator

    def offer(self, values: np.ndarray, family: str, params: Dict[str, Any]) -> Optional[float]:
        ratio = self.ratio(values)
        if ratio is None:
            logger.debug("Skipping zero-norm %s member %s", family, params)
            return None
        self.samples += 1
        if self.formula is not None and ratio > self.formula * (1.0 + self.tolerance):
            self.violations.append(Witness(family, params, ratio))
            logger.warning("Ratio %.6g from %s %s exceeds norm %.6g", ratio, family, params, self.formula)
        if self.best is None or ratio > self.best.ratio:
            self.best = Witness(family, params, ratio)
            self.best_values = values
        return ratio


def _split_budget(budget: int, strategies: List[str]) -> Dict[str, int]:
    if strategies == ['ascent']:
        warmup = max(1, budget // 4)
        return {'layered': warmup, 'ascent': budget - warmup}
    share, extra = divmod(budget, len(strategies))
    return {name: share + (1 if k < extra else 0) for k, name in enumerate(strategies)}


def _ascend(search: _Search, budget: int, seed: int):
    if search.best_values is None:
        return
    rng = np.random.default_rng([seed, 2])
    mask = search.op.source.indicator
    shape = mask.shape
    values = search.best_values.copy()
    current = search.best.ratio
    start = dict(search.best.params, family=search.best.family)
    for step in range(budget):
        support = np.flatnonzero(values > 0)
        if support.size == 0:
            break
        center = np.unravel_index(int(support[rng.integers(support.size)]), shape)
        radius = int(rng.integers(1, 5))
        box = tuple(slice(max(0, c - radius), c + radius + 1) for c in center)
        candidate = values.copy()
        candidate[box] = candidate[box] * math.exp(ASCENT_SIGMA * rng.standard_normal())
        ratio = search.offer(candidate, 'ascent', {'start': start, 'step': step})
        if ratio is not None and ratio > current:
            values, current = candidate, ratio


def empirical_norm(op: OperatorHandle, Q: ExponentLike, P: ExponentLike, strategy: str = 'all',
                   budget: int = 256, seed: int = 0, tolerance: float = SOUNDNESS_TOLERANCE) -> NormReport:
    """Best ratio ||Tf||_{L_P} / ||f||_{L_Q} over the selected test-function families

    The report flags every ratio above formula * (1 + tolerance) when the
    operator has a formula.
    """
    if budget < 1:
        raise MixnormError(f"Budget must be at least 1, got {budget}")
    P, Q = as_exponents(P), as_exponents(Q)
    if len(P) != op.target.grid.ndim or len(Q) != op.source.grid.ndim:
        raise GridError("Exponent lengths do not match the operator's dimensions")
    if op.source.count == 0:
        raise GridError("The source domain mask is empty")

    formula = op.formula(P, Q)
    grid_formula = None
    if hasattr(op, 'details') and formula is not None:
        grid_formula = op.details(P).grid_value
    elif formula is not None:
        grid_formula = formula

    strategies = parse_strategy(strategy)
    shares = _split_budget(int(budget), strategies)
    search = _Search(op, P, Q, formula, tolerance)

    for index in range(shares.get('random', 0)):
        values, params = random_member(op.source, seed, index)
        search.offer(values, 'random', params)

    if shares.get('layered', 0):
        family = LayeredFamily(op.source, Q, seed, op.hints(P, Q))
        for index in range(min(shares['layered'], len(family))):
            values, params = family.member(index)
            search.offer(values, 'layered', params)

    _ascend(search, shares.get('ascent', 0), seed)

    logger.info("%s: %d samples, best ratio %.6g, formula %s", op.kind, search.samples,
                search.best.ratio if search.best else 0.0, formula)
    return NormReport(op.kind, tuple(P), tuple(Q), formula, grid_formula,
                      search.best.ratio if search.best else 0.0, search.best, search.samples,
                      int(seed), strategy, tolerance, violations=search.violations)


def empirical_norm_refined(build: Callable[[int], OperatorHandle], Q: ExponentLike, P: ExponentLike,
                           levels: int, strategy: str = 'all', budget: int = 256,
                           seed: int = 0) -> NormReport:
    """empirical_norm on handles built for levels 0..levels-1; the last report carries the trace"""
    if levels < 1:
        raise GridError("Need at least one refinement level")
    trace = []
    report = None
    for level in range(levels):
        op = build(level)
        report = empirical_norm(op, Q, P, strategy, budget, seed)
        trace.append((op.source.grid.size, report.empirical_lower))
    report.refinement_trace = trace
    return report


# ==================== PROBES ====================

@dataclass
class ProbeTrace:
    """||op(f)||_{L_P} per truncation radius"""
    radii: List[float]
    values: List[float]

    @property
    def strictly_increasing(self) -> bool:
        return all(b > a for a, b in zip(self.values, self.values[1:]))

    @property
    def converged(self) -> bool:
        if len(self.values) < 2:
            return False
        last, previous = self.values[-1], self.values[-2]
        return abs(last - previous) <= 1e-2 * max(abs(last), 1e-300)

    def to_dict(self) -> Dict[str, Any]:
        return {'radii': self.radii, 'values': self.values,
                'strictly_increasing': self.strictly_increasing, 'converged': self.converged}


def divergence_probe(build: Callable[[float], OperatorHandle], fn: Callable, P: ExponentLike,
                     radii: Sequence[float]) -> ProbeTrace:
    """Mixed norm of op(f) on growing truncations; growth suggests op(f) is not in L_P"""
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise GridError(f"Truncation radii must increase, got {radii}")
    values = []
    for radius in radii:
        op = build(radius)
        values.append(mixed_norm(op.apply_callable(fn), P))
        logger.info("Probe radius %g: %.6g", radius, values[-1])
    return ProbeTrace(radii, values)


# ==================== HARDY EXTREMALS ====================

def hardy_extremal_ratio(P: ExponentLike, T: float, b: Optional[float] = None, m: int = 2500,
                         first_width: float = 1e-3) -> float:
    """||H_n f|| / ||f|| for f = prod x_i^{-1/p_i} chi_[1, T](x_i) on graded axes

    The ratio approaches prod p_i / (p_i - 1) as T grows.
    """
    P = as_exponents(P)
    b = float(b) if b is not None else 100.0 * float(T)
    axes = tuple(make_geometric_axis(0.0, b, m, first_width, label=f"x{i + 1}") for i in range(len(P)))
    grid = ProductGrid(axes)
    factors = [np.where((axis.nodes >= 1.0) & (axis.nodes <= T), axis.nodes ** (-1.0 / p), 0.0)
               for axis, p in zip(axes, P)]
    f = GridFunction(grid, _outer(factors), grid.full_mask())
    return mixed_norm(hardy_apply(f), P) / mixed_norm(f, P)
