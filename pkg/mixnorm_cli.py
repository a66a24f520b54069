#!/usr/bin/env python3
"""
Mixed Norm Laboratory - command line harness
Loads a JSON experiment config, runs one laboratory command and writes a
versioned report (JSON, CSV or PDF). Status lines go to stderr, reports to
--out or stdout.

Exit codes: 0 success, 1 other laboratory error, 2 invalid config or input,
3 invariant violation (a sampled ratio above its formula, a failed check).
"""

import argparse
import logging
import sys
import time
from typing import Any, Callable, Dict, List, Optional, Sequence

from experiment_config import (ConfigError, Experiment, ExperimentConfig, NodeBudgetExceeded, OUTPUT_FORMATS,
                               load_config, source_function)
from expr_dsl import EvaluationError, ParseError
from grid_core import GridError, MixnormError, doubling_truncations
from mixed_norm import ExponentError, mixed_norm
from norm_lab import InvariantViolation, SOUNDNESS_TOLERANCE, divergence_probe, empirical_norm
from report_generator import build_report, validate_report, write_report
from verification_suite import SUITES, CheckResult, run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_VIOLATION = 3

INVALID_INPUT_ERRORS = (ConfigError, ParseError, EvaluationError, GridError, NodeBudgetExceeded, ExponentError)

# operator kinds each apply command accepts
COMMAND_KINDS = {
    'compose': ('composition', 'identity', 'operator_I'),
    'hardy': ('hardy',),
    'product': ('product',),
    'steklov': ('steklov',),
}


def status(message: str = ""):
    print(message, file=sys.stderr)


def banner(title: str):
    status("=" * 60)
    status(title)
    status("=" * 60)


class RunOutcome:
    """Results of one command plus the violations that decide exit code 3"""

    def __init__(self, results: Dict[str, Any], violations: Optional[List[str]] = None):
        self.results = results
        self.violations = violations or []


# ==================== COMMANDS ====================

def _seed(args, config: ExperimentConfig) -> int:
    return args.seed if args.seed is not None else config.estimation.seed


def _experiment(args, config: ExperimentConfig, **kwargs) -> Experiment:
    return Experiment(config, max_nodes=args.max_nodes, **kwargs)


def run_norm(args, config: ExperimentConfig) -> RunOutcome:
    experiment = _experiment(args, config)
    f = experiment.test_function()
    value = mixed_norm(f, config.P)
    status(f"  ||f||_L{list(config.P)} = {value:.10g}")
    return RunOutcome({
        'name': config.name,
        'mixed_norm': value,
        'P': list(config.P),
        'shape': list(f.grid.shape),
        'nodes_in_domain': experiment.source.count,
    })


def _operator_ratio(experiment: Experiment, config: ExperimentConfig):
    op = experiment.operator()
    f = experiment.test_function()
    source_norm = mixed_norm(f, config.Q)
    image_norm = mixed_norm(op.apply(f), config.P)
    if source_norm == 0.0:
        raise GridError("The test function vanishes on the source domain")
    return op, source_norm, image_norm, image_norm / source_norm


def run_apply(args, config: ExperimentConfig) -> RunOutcome:
    accepted = COMMAND_KINDS[args.command]
    if config.operator.kind not in accepted:
        raise ConfigError(f"'{args.command}' runs {' or '.join(accepted)} operators, the config has "
                          f"'{config.operator.kind}'", "operator.kind")
    experiment = _experiment(args, config)
    op, source_norm, image_norm, ratio = _operator_ratio(experiment, config)
    formula = op.formula(config.P, config.Q)
    results = {
        'name': config.name,
        'operator': op.describe(),
        'P': list(config.P),
        'Q': list(config.Q),
        'source_norm': source_norm,
        'image_norm': image_norm,
        'ratio': ratio,
        'formula_value': formula if formula is not None else "not applicable",
    }
    if args.command == 'product':
        results['kernel_bound'] = op.bound(config.P, config.Q)._asdict()
    status(f"  ||Tf|| / ||f|| = {ratio:.10g}")
    if formula is not None:
        status(f"  formula       = {formula:.10g}")

    violations = []
    if formula is not None and ratio > formula * (1.0 + SOUNDNESS_TOLERANCE):
        violations.append(f"ratio {ratio:.10g} exceeds formula {formula:.10g}")
    return RunOutcome(results, violations)


def run_estimate(args, config: ExperimentConfig) -> RunOutcome:
    op = _experiment(args, config).operator()
    budget = args.budget if args.budget is not None else config.estimation.budget
    report = empirical_norm(op, config.Q, config.P, config.estimation.strategy, budget, _seed(args, config))
    status(f"  empirical lower bound = {report.empirical_lower:.10g} ({report.samples} samples)")
    if report.formula_value is not None:
        status(f"  formula               = {report.formula_value:.10g}")
    results = report.to_dict()
    results['name'] = config.name
    return RunOutcome(results, list(report.violations))


def _probe_function(config: ExperimentConfig):
    return source_function(config.function, config.ndim)


def run_probe(args, config: ExperimentConfig) -> RunOutcome:
    if not config.probe.radii:
        raise ConfigError("probe needs 'probe.radii'", "probe.radii")

    def build(radius):
        return _experiment(args, config, radius=radius).operator()

    trace = divergence_probe(build, _probe_function(config), config.P, config.probe.radii)
    for radius, value in zip(trace.radii, trace.values):
        status(f"  R = {radius:<10g} ||Tf|| = {value:.10g}")
    results = trace.to_dict()
    results['name'] = config.name
    results['rows'] = [{'radius': r, 'value': v} for r, v in zip(trace.radii, trace.values)]
    return RunOutcome(results)


def _refine_value(experiment: Experiment, config: ExperimentConfig, fn: Optional[Callable]) -> float:
    if fn is not None:
        return mixed_norm(experiment.operator().apply_callable(fn), config.P)
    if config.operator.kind == 'identity':
        return mixed_norm(experiment.test_function(), config.P)
    return _operator_ratio(experiment, config)[3]


def run_refine(args, config: ExperimentConfig) -> RunOutcome:
    levels = args.levels if args.levels is not None else config.levels
    if levels < 2:
        raise ConfigError(f"refine needs at least 2 levels, got {levels}", "levels")

    if config.probe.radii:
        steps = [{'radius': r} for r in doubling_truncations(config.probe.radii[0], levels)]
        fn = _probe_function(config)
    else:
        steps = [{'level': level} for level in range(levels)]
        fn = None

    rows = []
    previous = None
    for index, step in enumerate(steps):
        experiment = _experiment(args, config, **step)
        value = _refine_value(experiment, config, fn)
        row = {'level': index}
        if 'radius' in step:
            row['radius'] = step['radius']
        for i, axis in enumerate(experiment.source_spec.axes):
            row[f"m{i + 1}"] = axis.m
        row['value'] = value
        row['delta'] = value - previous if previous is not None else 0.0
        rows.append(row)
        previous = value
        status(f"  level {index}: {value:.10g}")
    return RunOutcome({'name': config.name, 'rows': rows})


def run_verify(args) -> RunOutcome:
    seed = args.seed if args.seed is not None else 0

    def progress(result: CheckResult):
        mark = "✓" if result.passed else "❌"
        status(f"  {mark} {result.name:.<50} {result.seconds:7.1f}s")
        if not result.passed:
            status(f"      {result.detail}")

    results = run_suite(args.suite, seed, progress=progress)
    rows = [result._asdict() for result in results]
    failed = [r.name for r in results if not r.passed]
    status(f"\n  {len(results) - len(failed)}/{len(results)} checks passed")
    return RunOutcome({'suite': args.suite, 'passed': not failed, 'rows': rows},
                      [f"check failed: {name}" for name in failed])


# ==================== ARGUMENTS ====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='mixnorm', description="Mixed norm Lebesgue space laboratory")
    subparsers = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--format', choices=OUTPUT_FORMATS, help="report format (default from config, else json)")
    common.add_argument('--out', help="report path (default from config, else stdout)")
    common.add_argument('--seed', type=int, help="random seed for sampling")
    common.add_argument('-v', '--verbose', action='count', default=0, help="-v info, -vv debug logging")

    configured = argparse.ArgumentParser(add_help=False, parents=[common])
    configured.add_argument('--config', required=True, help="experiment config (JSON)")
    configured.add_argument('--max-nodes', type=int, help="node budget for one run")

    commands = {
        'norm': "mixed norm of the config function",
        'compose': "composition operator ratio and norm formula",
        'hardy': "Hardy operator ratio and sharp constant",
        'product': "product kernel operator ratio and theorem bound",
        'steklov': "Hardy-Steklov operator ratio",
        'estimate': "empirical operator norm lower bound",
        'probe': "operator image norm on growing truncations",
        'refine': "value per grid refinement level",
    }
    for name, help_text in commands.items():
        sub = subparsers.add_parser(name, parents=[configured], help=help_text)
        if name == 'estimate':
            sub.add_argument('--budget', type=int, help="number of test functions")
        if name == 'refine':
            sub.add_argument('--levels', type=int, help="refinement levels (at least 2)")

    verify = subparsers.add_parser('verify', parents=[common], help="run the acceptance checks")
    verify.add_argument('--suite', choices=tuple(SUITES), default='core')
    return parser


def configure_logging(verbosity: int):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s', stream=sys.stderr)


def _emit(report: Dict[str, Any], fmt: str, path: Optional[str]):
    problems = validate_report(report)
    if problems:
        raise MixnormError(f"Report does not match schema: {'; '.join(problems)}")
    written = write_report(report, fmt, path)
    if fmt == 'pdf':
        status(f"✓ PDF summary written to {written}")
    elif path:
        status(f"✓ Report written to {path}")
    else:
        print(written)


def execute(args) -> int:
    timings: Dict[str, float] = {}
    start = time.perf_counter()

    if args.command == 'verify':
        banner(f"VERIFICATION SUITE: {args.suite.upper()}")
        config = None
        outcome = run_verify(args)
        fmt, path = args.format or 'json', args.out
    else:
        config = load_config(args.config)
        timings['load'] = time.perf_counter() - start
        banner(f"{args.command.upper()}: {config.name}")
        runners = {'norm': run_norm, 'estimate': run_estimate, 'probe': run_probe, 'refine': run_refine}
        outcome = runners.get(args.command, run_apply)(args, config)
        fmt = args.format or config.output.format
        path = args.out or config.output.path
    timings['total'] = time.perf_counter() - start

    seed = args.seed if args.seed is not None else (config.estimation.seed if config else 0)
    report = build_report(args.command, outcome.results, config.digest if config else None, seed, timings)
    _emit(report, fmt, path)

    if outcome.violations:
        for violation in outcome.violations:
            status(f"❌ {violation}")
        return EXIT_VIOLATION
    status("✅ Done")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return execute(args)
    except InvariantViolation as error:
        status(f"❌ Invariant violation: {error}")
        return EXIT_VIOLATION
    except INVALID_INPUT_ERRORS as error:
        status(f"❌ {type(error).__name__}: {error}")
        return EXIT_INVALID
    except MixnormError as error:
        status(f"❌ {type(error).__name__}: {error}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
