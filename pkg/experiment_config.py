"""
Experiment Configuration Module
Loads JSON experiment configs into dataclasses, validates every expression
against the variables its field may use, and builds grids, functions and
operator handles from them
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from expr_dsl import ExpressionFunction, ParseError
from grid_core import (Axis, DomainMask, GridFunction, MixnormError, ProductGrid,
                       make_geometric_axis, make_uniform_axis)
from mixed_norm import ExponentVector
from norm_lab import (CompositionHandle, HardyHandle, IdentityHandle, MultiplicationHandle,
                      OperatorHandle, OperatorIHandle, ProductHandle, SteklovHandle, parse_strategy)
from operators import KernelSet, SteklovLimits
from triangular_map import GeneralMap, MapLayer, TriangularMap, identity_map

logger = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 10 ** 8
OPERATOR_KINDS = ('identity', 'composition', 'hardy', 'product', 'multiplication', 'steklov', 'operator_I')
KERNEL_KINDS = ('product', 'steklov', 'operator_I')
OUTPUT_FORMATS = ('json', 'csv', 'pdf')


class ConfigError(MixnormError):
    """Config file missing, malformed or inconsistent"""

    def __init__(self, message: str, field_name: str = "", parse_error: Optional[ParseError] = None):
        self.field_name = field_name
        self.parse_error = parse_error
        super().__init__(f"{field_name}: {message}" if field_name else message)


class NodeBudgetExceeded(MixnormError):
    """Grid larger than the configured node budget"""


# ==================== SPECS ====================

@dataclass(frozen=True)
class AxisSpec:
    a: float
    b: float
    m: int
    weight: str = "1"
    spacing: str = "uniform"
    first_width: Optional[float] = None

    def scaled(self, factor: int) -> "AxisSpec":
        return AxisSpec(self.a, self.b, self.m * factor, self.weight, self.spacing, self.first_width)

    def truncated(self, radius: float, symmetric: bool) -> "AxisSpec":
        return AxisSpec(-radius if symmetric else 0.0, radius, self.m, self.weight, self.spacing,
                        self.first_width)


@dataclass(frozen=True)
class GridSpec:
    axes: Tuple[AxisSpec, ...]
    domain: str = "1"

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def nodes(self, factor: int = 1) -> int:
        return int(np.prod([axis.m * factor for axis in self.axes]))


@dataclass(frozen=True)
class OperatorSpec:
    kind: str
    fields: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class EstimationSpec:
    strategy: str = "all"
    budget: int = 256
    seed: int = 0


@dataclass(frozen=True)
class ProbeSpec:
    radii: Tuple[float, ...] = ()
    symmetric: bool = True


@dataclass(frozen=True)
class OutputSpec:
    path: Optional[str] = None
    format: str = "json"


@dataclass
class ExperimentConfig:
    """A validated experiment"""
    name: str
    grid: GridSpec
    source_grid: GridSpec
    function: str
    P: Tuple[float, ...]
    Q: Tuple[float, ...]
    operator: OperatorSpec
    estimation: EstimationSpec
    probe: ProbeSpec
    output: OutputSpec
    levels: int = 3
    max_nodes: int = DEFAULT_MAX_NODES
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def ndim(self) -> int:
        return self.grid.ndim

    @property
    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: Dict[str, Any]) -> str:
    """SHA-256 of the canonical (sorted-key, compact) JSON text"""
    canonical = json.dumps(raw, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode()).hexdigest()


# ==================== VARIABLE NAMES ====================

def x_names(n: int) -> List[str]:
    return [f"x{i + 1}" for i in range(n)]


def y_names(n: int) -> List[str]:
    return [f"y{i + 1}" for i in range(n)]


def _compile(source, names: Sequence[str], field_name: str,
             aliases: Optional[Dict[str, int]] = None) -> ExpressionFunction:
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(float(source))
    if not isinstance(source, str):
        raise ConfigError(f"expected an expression string, got {type(source).__name__}", field_name)
    try:
        return ExpressionFunction(source, names, aliases)
    except ParseError as error:
        raise ConfigError(str(error), field_name, error) from error


def _grid_aliases(n: int) -> Dict[str, int]:
    """Grid expressions may name coordinate i as x_i or y_i"""
    return {name: i for i, name in enumerate(y_names(n))}


def weight_function(spec: AxisSpec, index: int, field_name: str = "") -> ExpressionFunction:
    return _compile(spec.weight, [f"x{index + 1}"], field_name or f"axes[{index}].weight",
                    {f"y{index + 1}": 0, 't': 0})


def domain_function(spec: GridSpec, field_name: str = "domain") -> ExpressionFunction:
    return _compile(spec.domain, x_names(spec.ndim), field_name, _grid_aliases(spec.ndim))


def source_function(source: str, n: int, field_name: str = "function") -> ExpressionFunction:
    """Functions on Omega' use y_i, with x_i accepted as a synonym"""
    return _compile(source, y_names(n), field_name, {name: i for i, name in enumerate(x_names(n))})


# ==================== PARSING ====================

def _number(data: Dict[str, Any], key: str, field_name: str, default=None) -> float:
    value = data.get(key, default)
    if value is None or isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number", field_name)
    if not math.isfinite(float(value)):
        raise ConfigError(f"'{key}' must be finite", field_name)
    return float(value)


def _integer(data: Dict[str, Any], key: str, field_name: str, default: int,
             minimum: Optional[int] = None) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"must be an integer, got {value!r}", field_name)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be at least {minimum}, got {value}", field_name)
    return value


def _section(data: Dict[str, Any], key: str) -> Dict[str, Any]:
    """Optional nested object; absent means empty"""
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"must be an object, got {type(value).__name__}", key)
    return value


def _parse_axis(data: Any, field_name: str) -> AxisSpec:
    if not isinstance(data, dict):
        raise ConfigError("axis must be an object", field_name)
    a = _number(data, 'a', field_name)
    b = _number(data, 'b', field_name)
    m = data.get('m')
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ConfigError("'m' must be a positive integer", field_name)
    if not a < b:
        raise ConfigError(f"need a < b, got [{a}, {b}]", field_name)
    spacing = data.get('spacing', 'uniform')
    if spacing not in ('uniform', 'geometric'):
        raise ConfigError(f"spacing must be 'uniform' or 'geometric', got {spacing!r}", field_name)
    first_width = data.get('first_width')
    if spacing == 'geometric':
        first_width = _number(data, 'first_width', field_name, default=(b - a) / (100.0 * m))
    return AxisSpec(a, b, m, data.get('weight', "1"), spacing, first_width)


def _parse_grid(data: Any, field_name: str) -> GridSpec:
    if not isinstance(data, dict) or not isinstance(data.get('axes'), list) or not data['axes']:
        raise ConfigError("needs a non-empty 'axes' list", field_name)
    axes = tuple(_parse_axis(axis, f"{field_name}.axes[{i}]") for i, axis in enumerate(data['axes']))
    spec = GridSpec(axes, data.get('domain', "1"))
    for i, axis in enumerate(axes):
        weight_function(axis, i, f"{field_name}.axes[{i}].weight")
    domain_function(spec, f"{field_name}.domain")
    return spec


def _parse_exponents(values: Any, n: int, field_name: str) -> Tuple[float, ...]:
    if not isinstance(values, list) or len(values) != n:
        raise ConfigError(f"needs a list of {n} exponents", field_name)
    for i, value in enumerate(values):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"exponent {i + 1} must be a number, got {value!r}", field_name)
    return tuple(ExponentVector(tuple(values)).p)


def _layer_fields(layers: Any, n: int, field_name: str):
    if not isinstance(layers, list) or len(layers) != n:
        raise ConfigError(f"needs {n} layers", field_name)
    for i, layer in enumerate(layers):
        if isinstance(layer, str):
            layer = {'forward': layer}
        if not isinstance(layer, dict) or 'forward' not in layer:
            raise ConfigError("a layer needs a 'forward' expression", f"{field_name}[{i}]")
        _compile(layer['forward'], x_names(i + 1), f"{field_name}[{i}].forward")
        if 'inverse' in layer:
            _compile(layer['inverse'], x_names(i) + [f"y{i + 1}"], f"{field_name}[{i}].inverse")
        if 'derivative' in layer:
            _compile(layer['derivative'], x_names(i + 1), f"{field_name}[{i}].derivative")
        if layer.get('direction', 0) not in (-1, 0, 1) or isinstance(layer.get('direction'), bool):
            raise ConfigError("direction must be -1, 0 or 1", f"{field_name}[{i}].direction")


def _kernel_names(i: int) -> List[str]:
    return x_names(i + 1) + [f"y{i + 1}"]


def _parse_operator(data: Any, n: int) -> OperatorSpec:
    if data is None:
        return OperatorSpec('identity')
    if not isinstance(data, dict) or data.get('kind') not in OPERATOR_KINDS:
        raise ConfigError(f"'kind' must be one of {', '.join(OPERATOR_KINDS)}", "operator")
    kind = data['kind']
    fields = {key: value for key, value in data.items() if key != 'kind'}

    if kind == 'composition':
        if 'general_map' in fields:
            components = fields['general_map']
            if not isinstance(components, list) or len(components) != n:
                raise ConfigError(f"needs {n} components", "operator.general_map")
            for i, component in enumerate(components):
                _compile(component, x_names(n), f"operator.general_map[{i}]")
        else:
            _layer_fields(fields.get('layers'), n, "operator.layers")
    elif kind == 'operator_I':
        _layer_fields(fields.get('layers'), n, "operator.layers")
        _compile(fields.get('g', "1"), y_names(n), "operator.g", _grid_aliases_x(n))
    elif kind == 'multiplication':
        if 'g' not in fields:
            raise ConfigError("needs 'g'", "operator")
        _compile(fields['g'], y_names(n), "operator.g", _grid_aliases_x(n))
    elif kind == 'product':
        if 'rank_one' in fields:
            factors = fields['rank_one']
            if not isinstance(factors, list) or len(factors) != n:
                raise ConfigError(f"needs {n} factor pairs", "operator.rank_one")
            for i, pair in enumerate(factors):
                if not isinstance(pair, dict):
                    raise ConfigError("expected {u, v}", f"operator.rank_one[{i}]")
                _compile(pair.get('u', "1"), [f"x{i + 1}"], f"operator.rank_one[{i}].u")
                _compile(pair.get('v', "1"), [f"y{i + 1}"], f"operator.rank_one[{i}].v")
        else:
            _kernel_fields(fields.get('kernels'), n, "operator.kernels")
    elif kind == 'steklov':
        if n != 2:
            raise ConfigError("the Hardy-Steklov operator needs two variables", "operator")
        for key in ('lower', 'upper'):
            limits = fields.get(key)
            if not isinstance(limits, list) or len(limits) != 2:
                raise ConfigError("needs two limit expressions", f"operator.{key}")
            for i, limit in enumerate(limits):
                _compile(limit, x_names(2), f"operator.{key}[{i}]")
        if 'kernels' in fields:
            _kernel_fields(fields['kernels'], n, "operator.kernels")
    return OperatorSpec(kind, fields)


def _grid_aliases_x(n: int) -> Dict[str, int]:
    return {name: i for i, name in enumerate(x_names(n))}


def _kernel_fields(kernels: Any, n: int, field_name: str):
    if not isinstance(kernels, list) or len(kernels) != n:
        raise ConfigError(f"needs {n} kernels", field_name)
    for i, kernel in enumerate(kernels):
        _compile(kernel, _kernel_names(i), f"{field_name}[{i}]")


def parse_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a decoded config; every expression is parsed here"""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if 'grid' not in data:
        raise ConfigError("missing 'grid'")
    grid = _parse_grid(data['grid'], "grid")
    source_grid = _parse_grid(data['source_grid'], "source_grid") if 'source_grid' in data else grid
    if source_grid.ndim != grid.ndim:
        raise ConfigError(f"{source_grid.ndim} source axes for {grid.ndim} target axes", "source_grid")
    n = grid.ndim

    function = data.get('function', "1")
    source_function(function, n)
    try:
        P = _parse_exponents(data.get('P'), n, "P")
        Q = _parse_exponents(data['Q'], n, "Q") if 'Q' in data else P
    except MixnormError as error:
        if isinstance(error, ConfigError):
            raise
        raise ConfigError(str(error), "P/Q") from error

    operator = _parse_operator(data.get('operator'), n)

    estimation_data = _section(data, 'estimation')
    strategy = estimation_data.get('strategy', 'all')
    if not isinstance(strategy, str):
        raise ConfigError("strategy must be a string", "estimation.strategy")
    try:
        parse_strategy(strategy)
    except MixnormError as error:
        raise ConfigError(str(error), "estimation.strategy") from error
    estimation = EstimationSpec(strategy,
                                _integer(estimation_data, 'budget', "estimation.budget", 256, minimum=1),
                                _integer(estimation_data, 'seed', "estimation.seed", 0, minimum=0))

    probe_data = _section(data, 'probe')
    raw_radii = probe_data.get('radii', [])
    if not isinstance(raw_radii, list):
        raise ConfigError("radii must be a list of numbers", "probe.radii")
    radii = tuple(_number({'radius': r}, 'radius', f"probe.radii[{i}]") for i, r in enumerate(raw_radii))
    if any(b <= a for a, b in zip(radii, radii[1:])) or any(r <= 0 for r in radii):
        raise ConfigError("radii must be positive and increasing", "probe.radii")
    symmetric = probe_data.get('symmetric', True)
    if not isinstance(symmetric, bool):
        raise ConfigError("symmetric must be true or false", "probe.symmetric")
    probe = ProbeSpec(radii, symmetric)

    output_data = _section(data, 'output')
    path = output_data.get('path')
    if path is not None and not isinstance(path, str):
        raise ConfigError("path must be a string", "output.path")
    output = OutputSpec(path, output_data.get('format', 'json'))
    if output.format not in OUTPUT_FORMATS:
        raise ConfigError(f"format must be one of {', '.join(OUTPUT_FORMATS)}", "output.format")

    levels = _integer(data, 'levels', "levels", 3, minimum=1)
    max_nodes = _integer(data, 'max_nodes', "max_nodes", DEFAULT_MAX_NODES, minimum=1)
    name = data.get('name', 'experiment')
    if not isinstance(name, str):
        raise ConfigError("name must be a string", "name")

    return ExperimentConfig(name, grid, source_grid, function, P, Q, operator,
                            estimation, probe, output, levels, max_nodes, data)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as handle:
            data = json.load(handle)
    except FileNotFoundError as error:
        raise ConfigError(f"config file not found: {path}") from error
    except json.JSONDecodeError as error:
        raise ConfigError(f"invalid JSON at line {error.lineno} column {error.colno}: {error.msg}") from error
    except (OSError, UnicodeDecodeError) as error:
        raise ConfigError(f"cannot read config file {path}: {error}") from error
    config = parse_config(data)
    logger.info("Loaded config '%s' (%s)", config.name, config.digest[:12])
    return config


# ==================== BUILDERS ====================

def build_axis(spec: AxisSpec, index: int) -> Axis:
    weight = weight_function(spec, index)
    label = f"x{index + 1}"
    if spec.spacing == 'geometric':
        return make_geometric_axis(spec.a, spec.b, spec.m, spec.first_width, weight, label)
    return make_uniform_axis(spec.a, spec.b, spec.m, weight, label)


def build_mask(spec: GridSpec) -> DomainMask:
    grid = ProductGrid(tuple(build_axis(axis, i) for i, axis in enumerate(spec.axes)))
    return DomainMask.from_callable(grid, domain_function(spec))


class Experiment:
    """Grids, test function and operator for one config at one resolution

    level doubles every axis' cell count that many times; radius replaces every
    axis interval by [-radius, radius] (or [0, radius]) for truncation probes.
    """

    def __init__(self, config: ExperimentConfig, level: int = 0, radius: Optional[float] = None,
                 max_nodes: Optional[int] = None):
        self.config = config
        self.level = level
        factor = 2 ** level
        target, source = config.grid, config.source_grid
        if radius is not None:
            target = GridSpec(tuple(a.truncated(radius, config.probe.symmetric) for a in target.axes), target.domain)
            source = GridSpec(tuple(a.truncated(radius, config.probe.symmetric) for a in source.axes), source.domain)
        self.target_spec = GridSpec(tuple(a.scaled(factor) for a in target.axes), target.domain)
        self.source_spec = GridSpec(tuple(a.scaled(factor) for a in source.axes), source.domain)
        check_node_budget(self.target_spec, self.source_spec, config.operator.kind,
                          max_nodes if max_nodes is not None else config.max_nodes)

        self.target = build_mask(self.target_spec)
        self.source = self.target if self.source_spec == self.target_spec else build_mask(self.source_spec)
        self._operator: Optional[OperatorHandle] = None

    @property
    def ndim(self) -> int:
        return self.config.ndim

    @property
    def function(self) -> ExpressionFunction:
        return source_function(self.config.function, self.ndim)

    def test_function(self) -> GridFunction:
        return GridFunction.from_callable(self.source.grid, self.function, self.source)

    def source_callable(self, source, field_name: str) -> ExpressionFunction:
        return source_function(source, self.ndim, field_name)

    def map(self) -> TriangularMap:
        fields = self.config.operator.fields
        if self.config.operator.kind in ('composition', 'operator_I') and 'layers' in fields:
            return build_triangular_map(fields['layers'], self.target, self.source)
        return identity_map(self.target, self.source)

    def operator(self) -> OperatorHandle:
        if self._operator is None:
            self._operator = build_operator(self.config.operator, self)
        return self._operator


def check_node_budget(target: GridSpec, source: GridSpec, kind: str, max_nodes: int):
    """Target plus source nodes, or their product for kernel operators"""
    if kind in KERNEL_KINDS:
        nodes = target.nodes() * source.nodes()
    else:
        nodes = target.nodes() + source.nodes()
    if nodes > max_nodes:
        raise NodeBudgetExceeded(f"{kind} run needs {nodes:.3g} weighted samples; the budget is "
                                 f"{max_nodes:.3g} (raise it with --max-nodes)")


def build_triangular_map(layers: List[Any], domain: DomainMask, codomain: DomainMask) -> TriangularMap:
    built = []
    for i, layer in enumerate(layers):
        if isinstance(layer, str):
            layer = {'forward': layer}
        forward = _compile(layer['forward'], x_names(i + 1), f"operator.layers[{i}].forward")
        inverse = (_compile(layer['inverse'], x_names(i) + [f"y{i + 1}"], f"operator.layers[{i}].inverse")
                   if 'inverse' in layer else None)
        derivative = (_compile(layer['derivative'], x_names(i + 1), f"operator.layers[{i}].derivative")
                      if 'derivative' in layer else None)
        built.append(MapLayer(forward, inverse, derivative, int(layer.get('direction', 0)), layer['forward']))
    return TriangularMap(built, domain, codomain, name="config")


def build_kernels(kernels: List[Any], n: int) -> KernelSet:
    compiled = tuple(_compile(kernel, _kernel_names(i), f"operator.kernels[{i}]")
                     for i, kernel in enumerate(kernels))
    return KernelSet(compiled, sources=tuple(str(k) for k in kernels))


def build_rank_one(factors: List[Dict[str, Any]]) -> KernelSet:
    pairs = [(_compile(pair.get('u', "1"), [f"x{i + 1}"], f"operator.rank_one[{i}].u"),
              _compile(pair.get('v', "1"), [f"y{i + 1}"], f"operator.rank_one[{i}].v"))
             for i, pair in enumerate(factors)]
    return KernelSet.rank_one(pairs)


def build_operator(spec: OperatorSpec, experiment: Experiment) -> OperatorHandle:
    kind, fields = spec.kind, spec.fields
    n = experiment.ndim

    if kind == 'identity':
        return IdentityHandle(experiment.source)
    if kind == 'hardy':
        return HardyHandle(experiment.source)
    if kind == 'composition':
        if 'general_map' in fields:
            components = [_compile(c, x_names(n), f"operator.general_map[{i}]")
                          for i, c in enumerate(fields['general_map'])]
            return CompositionHandle(GeneralMap(components, experiment.target, experiment.source, name="config"))
        return CompositionHandle(experiment.map())
    if kind == 'multiplication':
        g_fn = experiment.source_callable(fields['g'], "operator.g")
        return MultiplicationHandle(GridFunction.from_callable(experiment.source.grid, g_fn, experiment.source))
    if kind == 'product':
        kernels = build_rank_one(fields['rank_one']) if 'rank_one' in fields else build_kernels(fields['kernels'], n)
        return ProductHandle(kernels, experiment.source, experiment.target)
    if kind == 'steklov':
        lower = tuple(_compile(c, x_names(2), f"operator.lower[{i}]") for i, c in enumerate(fields['lower']))
        upper = tuple(_compile(c, x_names(2), f"operator.upper[{i}]") for i, c in enumerate(fields['upper']))
        kernels = build_kernels(fields['kernels'], n) if 'kernels' in fields else None
        limits = SteklovLimits(lower, upper, tuple(fields['lower']) + tuple(fields['upper']))
        return SteklovHandle(limits, kernels, experiment.source, experiment.target)
    # operator_I
    g_fn = experiment.source_callable(fields.get('g', "1"), "operator.g")
    g = GridFunction.from_callable(experiment.source.grid, g_fn, experiment.source)
    return OperatorIHandle(experiment.map(), g, g_fn)
