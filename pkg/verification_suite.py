"""
Verification Suite
Acceptance checks for the laboratory: closed-form oracles, norm formulas against
sampled ratios, operator identities and the expression grammar. Suite 'core'
runs every check at reduced resolution, 'full' at the acceptance resolution.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from expr_dsl import EvaluationError, ParseError, evaluate, parse, to_source
from grid_core import (Axis, DomainMask, GridFunction, MixnormError, ProductGrid, make_geometric_axis,
                       make_uniform_axis)
from mixed_norm import minkowski_gap, mixed_norm, recompose_from_slices, slice_norm_profile
from norm_lab import (CompositionHandle, HardyHandle, IdentityHandle, MultiplicationHandle, ProductHandle,
                      composition_norm_formula, divergence_probe, empirical_norm, hardy_extremal_ratio,
                      operator_I_norm_formula, product_kernel_bound)
from operators import KernelSet, operator_I_apply, operator_I_pipeline
from triangular_map import GeneralMap, MapLayer, TriangularMap, change_of_variables_check, identity_map

logger = logging.getLogger(__name__)

COUPLING_NORM = 2.0 ** (5.0 / 6.0)
F23_NORM = 2.0 ** (7.0 / 6.0)


@dataclass(frozen=True)
class Resolution:
    """Grid sizes and sample counts for one suite"""
    f23_m: int
    f23_graded_m: int
    probe_m: int
    coupling_m: int
    coupling_budget: int
    hardy_m: int
    hardy_2d_m: int
    hardy_product_m: int
    rank_one_draws: int
    multiplier_draws: int
    factorization_cases: int
    change_of_variables_cases: int
    minkowski_cases: int
    fuzz_cases: int


SUITES: Dict[str, Resolution] = {
    'core': Resolution(f23_m=400, f23_graded_m=800, probe_m=400, coupling_m=100, coupling_budget=300,
                       hardy_m=4000, hardy_2d_m=320, hardy_product_m=400, rank_one_draws=40,
                       multiplier_draws=10, factorization_cases=5, change_of_variables_cases=20,
                       minkowski_cases=20, fuzz_cases=200),
    'full': Resolution(f23_m=2000, f23_graded_m=2000, probe_m=800, coupling_m=400, coupling_budget=2000,
                       hardy_m=20000, hardy_2d_m=1280, hardy_product_m=800, rank_one_draws=200,
                       multiplier_draws=50, factorization_cases=20, change_of_variables_cases=100,
                       minkowski_cases=100, fuzz_cases=1000),
}


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str
    seconds: float


def _box(bounds: Sequence[Tuple[float, float]], m: Sequence[int]) -> ProductGrid:
    return ProductGrid(tuple(make_uniform_axis(a, b, k, label=f"x{i + 1}")
                             for i, ((a, b), k) in enumerate(zip(bounds, m))))


def _random_axis(rng: np.random.Generator, size: int) -> Axis:
    edges = np.concatenate(([0.0], np.cumsum(rng.uniform(0.2, 1.5, size))))
    nodes = 0.5 * (edges[:-1] + edges[1:])
    return Axis(nodes, rng.uniform(0.1, 2.0, size), edges)


def f23(y1, y2):
    return 1.0 / ((1.0 + np.abs(y1)) * np.sqrt(1.0 + np.abs(y2)))


def truncated_f23_norm(R: float) -> float:
    """L_{2,3} norm of f23 on [-R, R]^2 in closed form"""
    inner = 4.0 * (1.0 - (1.0 + R) ** -0.5)
    outer = 2.0 * (1.0 - 1.0 / (1.0 + R))
    return math.sqrt(inner ** (2.0 / 3.0) * outer)


# ==================== MIXED NORM ====================

def check_mixed_norm_oracle(res: Resolution, seed: int) -> Tuple[bool, str]:
    grid = _box([(-50.0, 50.0)] * 2, [res.f23_m] * 2)
    value = mixed_norm(GridFunction.from_callable(grid, f23), (2, 3))
    expected = truncated_f23_norm(50.0)

    axis = make_geometric_axis(-1e4, 1e4, res.f23_graded_m, 0.01)
    graded = mixed_norm(GridFunction.from_callable(ProductGrid((axis, axis)), f23), (2, 3))

    swapped = mixed_norm(GridFunction.from_callable(grid, lambda y1, y2: f23(y2, y1)), (2, 3))
    passed = (abs(value - expected) <= 0.02 * expected and abs(graded - F23_NORM) <= 0.02 * F23_NORM
              and abs(swapped - value) > 0.1 * value)
    return passed, (f"[-50,50]^2: {value:.6f} (closed form {expected:.6f}); [-1e4,1e4]^2: {graded:.6f} "
                    f"(limit {F23_NORM:.6f}); variables swapped: {swapped:.6f}")


def check_slice_recursion(res: Resolution, seed: int) -> Tuple[bool, str]:
    worst = 0.0
    for case in range(50):
        rng = np.random.default_rng([seed, 2, case])
        n = int(rng.integers(2, 4))
        grid = ProductGrid(tuple(_random_axis(rng, int(rng.integers(3, 12))) for _ in range(n)))
        mask = DomainMask(grid, rng.random(grid.shape) < 0.7)
        f = GridFunction(grid, rng.normal(size=grid.shape), mask)
        P = tuple(rng.uniform(1.0, 5.0, n))
        direct = mixed_norm(f, P)
        recomposed = recompose_from_slices(slice_norm_profile(f, P), grid.axes[0], P[0])
        worst = max(worst, abs(direct - recomposed) / max(direct, 1e-300))
    return worst <= 1e-12, f"worst relative gap {worst:.2e} over 50 cases"


def check_minkowski(res: Resolution, seed: int) -> Tuple[bool, str]:
    failures = 0
    worst_equality = 0.0
    for case in range(res.minkowski_cases):
        rng = np.random.default_rng([seed, 12, case])
        grid = ProductGrid((_random_axis(rng, int(rng.integers(5, 30))), _random_axis(rng, int(rng.integers(5, 30)))))
        p = float(rng.uniform(1.0, 5.0))
        f = GridFunction(grid, rng.normal(size=grid.shape), grid.full_mask())
        if not minkowski_gap(f, p).holds:
            failures += 1
        a, b = rng.random(grid.shape[0]), rng.random(grid.shape[1])
        gap = minkowski_gap(GridFunction(grid, np.outer(a, b), grid.full_mask()), p)
        worst_equality = max(worst_equality, abs(gap.lhs - gap.rhs) / max(gap.rhs, 1e-300))
    return failures == 0 and worst_equality <= 1e-10, \
        f"{failures} violations; separable equality gap {worst_equality:.2e}"


# ==================== COMPOSITION ====================

def rotation_probe(res: Resolution, radii: Sequence[float], rotate: bool):
    def build(radius):
        axis = make_geometric_axis(-radius, radius, res.probe_m, 0.01)
        mask = ProductGrid((axis, axis)).full_mask()
        if not rotate:
            return IdentityHandle(mask)
        return CompositionHandle(GeneralMap((lambda x1, x2: x2, lambda x1, x2: -x1), mask, mask, "rotation"))
    return divergence_probe(build, f23, (2, 3), radii)


def check_rotation(res: Resolution, seed: int) -> Tuple[bool, str]:
    rotated = rotation_probe(res, (10.0, 100.0), rotate=True)
    oracle = [math.sqrt(2.0 * math.log(1.0 + r)) for r in rotated.radii]
    close = all(abs(v - o) <= 0.05 * o for v, o in zip(rotated.values, oracle))
    identity = rotation_probe(res, (10.0, 100.0, 1000.0, 10000.0), rotate=False)
    passed = rotated.strictly_increasing and close and identity.converged
    return passed, (f"rotation {['%.4f' % v for v in rotated.values]} vs {['%.4f' % o for o in oracle]}; "
                    f"identity {['%.4f' % v for v in identity.values]}")


def coupling_map(m: int) -> TriangularMap:
    """psi_1 = x1/2, psi_2 = x2/(1 + x1) from [0,1]^2 onto {y2 <= 1/(1 + 2 y1)}"""
    x_grid = _box([(0.0, 1.0), (0.0, 1.0)], [m, m])
    y_grid = _box([(0.0, 0.5), (0.0, 1.0)], [m, m])
    codomain = DomainMask.from_callable(y_grid, lambda y1, y2: y2 <= 1.0 / (1.0 + 2.0 * y1))
    layers = [MapLayer(lambda x1: x1 / 2.0, source="x1/2"),
              MapLayer(lambda x1, x2: x2 / (1.0 + x1), source="x2/(1+x1)")]
    return TriangularMap(layers, x_grid.full_mask(), codomain, name="coupling")


def check_coupling_map(res: Resolution, seed: int) -> Tuple[bool, str]:
    map_ = coupling_map(res.coupling_m)
    formula = composition_norm_formula(map_, (2, 3))
    report = empirical_norm(CompositionHandle(map_), (2, 3), (2, 3), 'layered+ascent',
                            res.coupling_budget, seed)
    passed = (abs(formula - COUPLING_NORM) <= 1e-6 and report.empirical_lower >= 0.9 * formula
              and report.sound)
    return passed, (f"formula {formula:.8f} (exact {COUPLING_NORM:.8f}); empirical {report.empirical_lower:.6f} "
                    f"from {report.samples} samples; {len(report.violations)} violations")


def dilation_map(m: int) -> TriangularMap:
    x_grid = _box([(0.0, 1.0)], [m])
    y_grid = _box([(0.0, 0.5)], [m])
    return TriangularMap([MapLayer(lambda x1: x1 / 2.0, source="x1/2")], x_grid.full_mask(), y_grid.full_mask())


def check_one_dimensional_composition(res: Resolution, seed: int) -> Tuple[bool, str]:
    map_ = dilation_map(400)
    details = []
    passed = True
    for p in (1.5, 2.0, 3.0):
        formula = composition_norm_formula(map_, (p,))
        report = empirical_norm(CompositionHandle(map_), (p,), (p,), 'all', 200, seed)
        ok = abs(formula - 2.0 ** (1.0 / p)) <= 1e-9 and report.empirical_lower >= 0.95 * formula and report.sound
        passed = passed and ok
        details.append(f"p={p}: {formula:.10f} / {report.empirical_lower:.6f}")
    return passed, "; ".join(details)


def check_change_of_variables(res: Resolution, seed: int) -> Tuple[bool, str]:
    worst = 0.0
    for case in range(res.change_of_variables_cases):
        rng = np.random.default_rng([seed, 11, case])
        a, b, c = rng.uniform(-1.0, 1.0), rng.uniform(0.5, 2.0), rng.uniform(0.0, 1.0)
        alpha, beta, gamma = rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.5, 6.0)

        def psi(x, a=a, b=b, c=c):
            return a + b * x + c * x ** 3

        x_axis = make_uniform_axis(0.0, 1.0, 2000, lambda x, alpha=alpha: 1.0 + alpha * x)
        y_axis = make_uniform_axis(psi(0.0), psi(1.0), 2000, lambda y, beta=beta: 1.0 + beta * y ** 2)
        map_ = TriangularMap([MapLayer(psi)], ProductGrid((x_axis,)).full_mask(),
                             ProductGrid((y_axis,)).full_mask())
        lo, hi = np.sort(rng.uniform(psi(0.0), psi(1.0), 2))
        gap = change_of_variables_check(lambda y, gamma=gamma: 1.0 + np.sin(gamma * y) ** 2, map_, (lo, hi))
        worst = max(worst, gap.relative_gap)
    return worst <= 1e-3, f"worst relative gap {worst:.2e} over {res.change_of_variables_cases} cases"


# ==================== HARDY ====================

def _unit_box_indicator(*y):
    """Indicator of [0, 1]^n on open-mesh coordinates"""
    return np.prod(np.broadcast_arrays(*[np.where(v <= 1.0, 1.0, 0.0) for v in y]), axis=0)


def hardy_indicator_ratio(m: int, n: int, b: float) -> float:
    grid = _box([(0.0, b)] * n, [m] * n)
    f = GridFunction.from_callable(grid, _unit_box_indicator)
    return mixed_norm(HardyHandle(grid.full_mask()).apply(f), (2,) * n) / mixed_norm(f, (2,) * n)


def check_hardy(res: Resolution, seed: int) -> Tuple[bool, str]:
    ratio = hardy_indicator_ratio(res.hardy_m, 1, 200.0)
    extremal = hardy_extremal_ratio((2,), 1e6, b=1e8, m=2500)
    report = empirical_norm(HardyHandle(_box([(0.0, 64.0)], [256]).full_mask()), (2,), (2,),
                            'random+layered', 200, seed)
    passed = abs(ratio - math.sqrt(2.0)) <= 0.01 * math.sqrt(2.0) and extremal >= 1.7 and report.sound
    return passed, (f"indicator ratio {ratio:.6f} (sqrt 2 = {math.sqrt(2.0):.6f}); extremal T=1e6 {extremal:.4f}; "
                    f"best sampled {report.empirical_lower:.4f} <= 2")


def check_mixed_hardy(res: Resolution, seed: int) -> Tuple[bool, str]:
    ratio = hardy_indicator_ratio(res.hardy_2d_m, 2, 64.0)
    extremal = hardy_extremal_ratio((2, 2), 1e4, b=1e6, m=res.hardy_product_m)
    report = empirical_norm(HardyHandle(_box([(0.0, 16.0)] * 2, [48, 48]).full_mask()), (2, 2), (2, 2),
                            'random+layered', 100, seed)
    passed = abs(ratio - 2.0) <= 0.04 and extremal >= 0.7 * 4.0 and report.sound
    return passed, (f"H_2 indicator ratio {ratio:.5f}; product extremal {extremal:.4f}; "
                    f"best sampled {report.empirical_lower:.4f} <= 4")


# ==================== PRODUCT AND MULTIPLICATION ====================

def random_rank_one(rng: np.random.Generator, n: int) -> KernelSet:
    factors = []
    for _ in range(n):
        c0, c1 = rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0)
        d0, d1 = rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0)
        factors.append((lambda t, c0=c0, c1=c1: c0 * np.exp(c1 * t),
                        lambda t, d0=d0, d1=d1: d0 + d1 * t ** 2))
    return KernelSet.rank_one(factors)


def check_rank_one_product(res: Resolution, seed: int) -> Tuple[bool, str]:
    x_grid = _box([(0.0, 1.0), (0.0, 1.0)], [16, 16])
    y_grid = _box([(0.0, 2.0), (0.0, 1.0)], [16, 16])
    worst, best_extremal = 0.0, 1.0
    for draw in range(res.rank_one_draws):
        rng = np.random.default_rng([seed, 8, draw])
        kernels = random_rank_one(rng, 2)
        P, Q = tuple(rng.uniform(1.2, 4.0, 2)), tuple(rng.uniform(1.2, 4.0, 2))
        op = ProductHandle(kernels, y_grid.full_mask(), x_grid.full_mask())
        bound = product_kernel_bound(kernels, x_grid, y_grid, P, Q).value
        f = GridFunction(y_grid, np.abs(rng.normal(size=y_grid.shape)), y_grid.full_mask())
        worst = max(worst, mixed_norm(op.apply(f), P) / (bound * mixed_norm(f, Q)))
        if draw < 10:
            factors = [np.asarray(v(axis.nodes), dtype=float) ** (1.0 / (q - 1.0))
                       for (_, v), axis, q in zip(kernels.factors, y_grid.axes, Q)]
            extremal = GridFunction(y_grid, np.outer(*factors), y_grid.full_mask())
            ratio = mixed_norm(op.apply(extremal), P) / (bound * mixed_norm(extremal, Q))
            best_extremal = min(best_extremal, ratio)
    passed = worst <= 1.0 + 1e-2 and best_extremal >= 0.98
    return passed, f"max ratio / bound {worst:.6f}; Hoelder-extremal ratio / bound >= {best_extremal:.6f}"


def check_multiplication(res: Resolution, seed: int) -> Tuple[bool, str]:
    grid = _box([(0.0, 1.0), (0.0, 1.0)], [12, 12])
    worst = 0.0
    centered = True
    for draw in range(res.multiplier_draws):
        rng = np.random.default_rng([seed, 9, draw])
        g = GridFunction(grid, rng.normal(size=grid.shape), grid.full_mask())
        P = tuple(rng.uniform(1.0, 4.0, 2))
        report = empirical_norm(MultiplicationHandle(g), P, P, 'layered', 3, seed)
        worst = max(worst, abs(report.empirical_lower - g.esssup()))
        centered = centered and tuple(report.witness.params['center']) == g.argmax_abs()
    return worst <= 1e-10 and centered, f"max |empirical - max|g|| = {worst:.2e}; witness at argmax: {centered}"


# ==================== OPERATOR I ====================

def check_factorization(res: Resolution, seed: int) -> Tuple[bool, str]:
    x_grid = _box([(0.0, 1.0), (0.0, 1.0)], [40, 40])
    y_grid = _box([(0.0, 1.0), (0.0, 1.0)], [40, 40])
    worst = 0.0
    for case in range(res.factorization_cases):
        rng = np.random.default_rng([seed, 10, case])
        a, c = rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0)
        k1, k2, s1, s2 = rng.uniform(0.5, 3.0, 4)
        layers = [MapLayer(lambda x1, a=a: a * x1 + (1.0 - a) * x1 ** 2),
                  MapLayer(lambda x1, x2, c=c: x2 * (c + (1.0 - c) * x1 ** 2))]
        map_ = TriangularMap(layers, x_grid.full_mask(), y_grid.full_mask())
        g = GridFunction.from_callable(y_grid, lambda y1, y2, k1=k1, k2=k2: 1.0 + 0.5 * np.sin(k1 * y1 + k2 * y2))
        f = GridFunction.from_callable(y_grid, lambda y1, y2, s1=s1, s2=s2: np.exp(-s1 * (y1 - 0.3) ** 2 - s2 * y2))
        direct = operator_I_apply(map_, g, f).masked_values
        staged = operator_I_pipeline(map_, g, f).masked_values
        worst = max(worst, float(np.max(np.abs(direct - staged)) / np.max(np.abs(direct))))

    mask = y_grid.full_mask()
    formula = operator_I_norm_formula(identity_map(mask), GridFunction.constant(y_grid, 1.0), (2, 2))
    passed = worst <= 1e-2 and abs(formula - 4.0) <= 1e-12
    return passed, f"max relative pipeline deviation {worst:.2e}; identity-map norm {formula!r}"


# ==================== PARSER ====================

GOLDEN_VALUES: List[Tuple[str, float]] = [
    ("1+2*3", 7.0), ("(1+2)*3", 9.0), ("2^3^2", 512.0), ("-2^2", 4.0), ("2*-3", -6.0),
    ("10/4", 2.5), ("8-3-2", 3.0), ("16/4/2", 2.0), ("x1*x2", 6.0), ("x1^x2", 8.0),
    ("abs(-3.5)", 3.5), ("sqrt(16)", 4.0), ("exp(0)", 1.0), ("log(1)", 0.0), ("min(x1, x2)", 2.0),
    ("max(x1, x2)", 3.0), ("pow(2, 10)", 1024.0), ("chi(0, 1, 0.5)", 1.0), ("chi(0, 1, 1)", 1.0),
    ("chi(0, 1, 1.5)", 0.0), ("1e3", 1000.0), (".5+.25", 0.75), ("2.5E-1", 0.25), ("--3", 3.0),
    ("1/(1+x1)", 1.0 / 3.0), ("x1 - -x2", 5.0), ("2*(x1+x2)^2", 50.0), ("  x1  ", 2.0), ("-x1^2", 4.0),
]

# (source, 0-based offset of the reported error)
GOLDEN_PARSE_ERRORS: List[Tuple[str, int]] = [
    ("min(x1", 6), ("1+", 2), ("(1+2", 4), ("1+2)", 3), ("z+1", 0), ("sqrt 4", 5), ("min(1)", 0),
    ("chi(1,2)", 0), ("1 $ 2", 2), ("", 0), ("2 3", 2), ("()", 1),
]

GOLDEN_EVALUATION_ERRORS: List[str] = ["1/0", "0^-1", "(-8)^(1/3)", "sqrt(-1)", "log(0)", "x3"]

GOLDEN_BINDINGS = {'x1': 2.0, 'x2': 3.0}
GOLDEN_VARS = ('x1', 'x2', 'x3')


def run_golden_cases() -> List[str]:
    """Failures of the grammar golden suite"""
    failures = []
    for source, expected in GOLDEN_VALUES:
        try:
            value = evaluate(parse(source, GOLDEN_VARS), GOLDEN_BINDINGS)
            if abs(value - expected) > 1e-12 * max(1.0, abs(expected)):
                failures.append(f"{source!r} = {value}, expected {expected}")
        except MixnormError as error:
            failures.append(f"{source!r} raised {error}")
    for source, offset in GOLDEN_PARSE_ERRORS:
        try:
            parse(source, GOLDEN_VARS[:2])
            failures.append(f"{source!r} parsed")
        except ParseError as error:
            if error.offset != offset:
                failures.append(f"{source!r} error at {error.offset}, expected {offset}")
    for source in GOLDEN_EVALUATION_ERRORS:
        try:
            evaluate(parse(source, GOLDEN_VARS), GOLDEN_BINDINGS)
            failures.append(f"{source!r} evaluated")
        except EvaluationError:
            pass
    return failures


def random_expression(rng: np.random.Generator, names: Sequence[str], depth: int = 0) -> str:
    """Random well-formed source text"""
    kind = int(rng.integers(0, 6 if depth < 4 else 2))
    if kind == 0:
        style = int(rng.integers(0, 4))
        value = float(rng.uniform(0.0, 100.0))
        return [str(int(value)), f"{value:.3f}", f"{value:.2e}", f".{int(value)}"][style]
    if kind == 1:
        return str(rng.choice(list(names)))
    if kind == 2:
        op = str(rng.choice(['+', '-', '*', '/', '^']))
        return f"{random_expression(rng, names, depth + 1)} {op} {random_expression(rng, names, depth + 1)}"
    if kind == 3:
        return "-" + random_expression(rng, names, depth + 1)
    if kind == 4:
        return f"({random_expression(rng, names, depth + 1)})"
    name = str(rng.choice(['abs', 'sqrt', 'exp', 'log', 'min', 'max', 'pow', 'chi']))
    arity = {'min': 2, 'max': 2, 'pow': 2, 'chi': 3}.get(name, 1)
    args = ", ".join(random_expression(rng, names, depth + 1) for _ in range(arity))
    return f"{name}({args})"


def check_parser(res: Resolution, seed: int) -> Tuple[bool, str]:
    failures = run_golden_cases()
    rng = np.random.default_rng([seed, 13])
    mismatches = 0
    for _ in range(res.fuzz_cases):
        source = random_expression(rng, ('x1', 'x2', 'y1'))
        ast = parse(source, ('x1', 'x2', 'y1'))
        if parse(to_source(ast), ('x1', 'x2', 'y1')) != ast:
            mismatches += 1
    total = len(GOLDEN_VALUES) + len(GOLDEN_PARSE_ERRORS) + len(GOLDEN_EVALUATION_ERRORS)
    return not failures and mismatches == 0, \
        f"{total - len(failures)}/{total} golden cases; {mismatches} round-trip mismatches in {res.fuzz_cases}" + \
        (f"; first failure: {failures[0]}" if failures else "")


# ==================== RUNNER ====================

CHECKS: List[Tuple[str, Callable[[Resolution, int], Tuple[bool, str]]]] = [
    ("mixed norm oracle", check_mixed_norm_oracle),
    ("slice recursion", check_slice_recursion),
    ("rotation counterexample", check_rotation),
    ("coupling map composition norm", check_coupling_map),
    ("one-dimensional composition norm", check_one_dimensional_composition),
    ("Hardy inequality", check_hardy),
    ("mixed Hardy inequality", check_mixed_hardy),
    ("rank-one product operator", check_rank_one_product),
    ("multiplication operator", check_multiplication),
    ("operator I factorization", check_factorization),
    ("change of variables", check_change_of_variables),
    ("Minkowski integral inequality", check_minkowski),
    ("expression grammar", check_parser),
]


def run_suite(name: str, seed: int = 0, only: Optional[Sequence[str]] = None,
              progress: Optional[Callable[[CheckResult], None]] = None) -> List[CheckResult]:
    if name not in SUITES:
        raise MixnormError(f"Unknown suite '{name}' (use {', '.join(SUITES)})")
    resolution = SUITES[name]
    results = []
    for check_name, check in CHECKS:
        if only and check_name not in only:
            continue
        start = time.perf_counter()
        try:
            passed, detail = check(resolution, seed)
        except MixnormError as error:
            passed, detail = False, f"{type(error).__name__}: {error}"
        except Exception as error:
            logger.exception("Check '%s' raised", check_name)
            passed, detail = False, f"unexpected {type(error).__name__}: {error}"
        result = CheckResult(check_name, bool(passed), detail, time.perf_counter() - start)
        logger.info("%s: %s (%.1fs)", check_name, "passed" if passed else "FAILED", result.seconds)
        results.append(result)
        if progress:
            progress(result)
    return results
