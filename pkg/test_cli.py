#!/usr/bin/env python3
"""
Tests for the mixnorm command line: exit codes, report contents and output
formats
"""

import contextlib
import io
import json
import os
import sys
import tempfile
from unittest import mock

import pandas as pd

from mixnorm_cli import EXIT_INVALID, EXIT_OK, EXIT_VIOLATION, main
from norm_lab import NormReport, Witness
from report_generator import SCHEMA_VERSION
from testing_utils import run_module_tests

SQUARE = {
    'name': "unit square",
    'grid': {'axes': [{'a': 0, 'b': 1, 'm': 16}, {'a': 0, 'b': 1, 'm': 16}]},
    'function': "y1 + y2",
    'P': [2, 3],
}

HARDY = {
    'name': "hardy indicator",
    'grid': {'axes': [{'a': 0, 'b': 10, 'm': 200}]},
    'function': "chi(0, 1, y1)",
    'P': [2],
    'operator': {'kind': 'hardy'},
    'estimation': {'strategy': 'random+layered', 'budget': 20, 'seed': 4},
}


def run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def write_config(directory, data, name='config.json'):
    path = os.path.join(directory, name)
    with open(path, 'w') as handle:
        json.dump(data, handle)
    return path


def test_norm_writes_a_versioned_report():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, SQUARE)
        out = os.path.join(directory, 'norm.json')
        code, _, err = run_cli(['norm', '--config', config, '--out', out])
        assert code == EXIT_OK
        assert "✅" in err
        with open(out) as handle:
            report = json.load(handle)
    assert report['schema_version'] == SCHEMA_VERSION
    assert report['command'] == 'norm'
    assert len(report['config_digest']) == 64
    assert report['results']['mixed_norm'] > 0.0
    assert report['results']['shape'] == [16, 16]
    assert 'total' in report['timings']


def test_report_goes_to_stdout_without_a_path():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, SQUARE)
        code, out, _ = run_cli(['norm', '--config', config, '--seed', '11'])
    assert code == EXIT_OK
    report = json.loads(out)
    assert report['seed'] == 11


def test_malformed_expression_exits_with_invalid_input():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, dict(SQUARE, function="y1 + (y2"))
        code, out, err = run_cli(['norm', '--config', config])
    assert code == EXIT_INVALID
    assert out == ""
    assert "function" in err


def test_missing_config_exits_with_invalid_input():
    code, _, err = run_cli(['norm', '--config', '/nonexistent/mixnorm.json'])
    assert code == EXIT_INVALID
    assert "not found" in err


def test_command_must_match_the_operator_kind():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, HARDY)
        code, _, err = run_cli(['compose', '--config', config])
    assert code == EXIT_INVALID
    assert "operator.kind" in err


def test_malformed_config_values_exit_with_invalid_input():
    cases = [(dict(SQUARE, estimation={'budget': "many"}), "estimation.budget"),
             (dict(SQUARE, P=["a", 2]), "P"),
             (dict(SQUARE, estimation=[]), "estimation"),
             (dict(SQUARE, max_nodes="lots"), "max_nodes")]
    with tempfile.TemporaryDirectory() as directory:
        for data, field_name in cases:
            config = write_config(directory, data)
            code, out, err = run_cli(['norm', '--config', config])
            assert code == EXIT_INVALID, field_name
            assert out == ""
            assert f"{field_name}:" in err


def test_node_budget_exits_with_invalid_input():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, SQUARE)
        code, _, _ = run_cli(['norm', '--config', config, '--max-nodes', '10'])
    assert code == EXIT_INVALID


def test_hardy_ratio_stays_below_the_constant():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, HARDY)
        code, out, _ = run_cli(['hardy', '--config', config])
    assert code == EXIT_OK
    results = json.loads(out)['results']
    assert results['formula_value'] == 2.0
    assert 0.0 < results['ratio'] < 2.0


def test_estimate_reports_the_witness():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, HARDY)
        code, out, _ = run_cli(['estimate', '--config', config, '--budget', '12'])
    assert code == EXIT_OK
    results = json.loads(out)['results']
    assert results['sound'] is True
    assert results['samples'] <= 12
    assert results['empirical_lower'] <= 2.0 * 1.01
    assert results['witness']['family'] in ('random', 'layered')


def test_violations_exit_with_code_three():
    report = NormReport('hardy', (2.0,), (2.0,), 2.0, 2.0, 2.5, Witness('random', {'member': 1}, 2.5), 1, 0,
                        'random', violations=[Witness('random', {'member': 1}, 2.5)])
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, HARDY)
        with mock.patch('mixnorm_cli.empirical_norm', return_value=report):
            code, out, err = run_cli(['estimate', '--config', config])
    assert code == EXIT_VIOLATION
    assert json.loads(out)['results']['sound'] is False
    assert "❌" in err


def test_refine_needs_two_levels():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, SQUARE)
        code, _, err = run_cli(['refine', '--config', config, '--levels', '1'])
    assert code == EXIT_INVALID
    assert "levels" in err


def test_refine_writes_csv_rows():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, SQUARE)
        out = os.path.join(directory, 'refine.csv')
        code, _, _ = run_cli(['refine', '--config', config, '--levels', '3', '--format', 'csv', '--out', out])
        assert code == EXIT_OK
        frame = pd.read_csv(out)
    assert list(frame['level']) == [0, 1, 2]
    assert list(frame['m1']) == [16, 32, 64]
    assert frame['delta'].iloc[0] == 0.0
    assert abs(frame['delta'].iloc[-1]) < 1e-2


def test_probe_needs_radii():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, SQUARE)
        code, _, _ = run_cli(['probe', '--config', config])
    assert code == EXIT_INVALID


def test_probe_rows_follow_the_radii():
    data = dict(SQUARE, function="exp(-y1^2 - y2^2)", probe={'radii': [2, 4, 8]})
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, data)
        code, out, _ = run_cli(['probe', '--config', config])
    assert code == EXIT_OK
    results = json.loads(out)['results']
    assert [row['radius'] for row in results['rows']] == [2.0, 4.0, 8.0]
    assert results['values'][0] > 0.0


def test_same_config_and_seed_give_the_same_report():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, HARDY)
        reports = []
        for _ in range(2):
            code, out, _ = run_cli(['estimate', '--config', config, '--seed', '7', '--budget', '16'])
            assert code == EXIT_OK
            report = json.loads(out)
            report.pop('timings')
            reports.append(report)
    assert reports[0] == reports[1]
    assert reports[0]['seed'] == 7


def test_pdf_summary():
    with tempfile.TemporaryDirectory() as directory:
        config = write_config(directory, SQUARE)
        out = os.path.join(directory, 'norm.pdf')
        code, _, err = run_cli(['norm', '--config', config, '--format', 'pdf', '--out', out])
        assert code == EXIT_OK
        with open(out, 'rb') as handle:
            assert handle.read(4) == b'%PDF'
    assert "PDF summary" in err


if __name__ == "__main__":
    exit_code = run_module_tests(globals(), "COMMAND LINE TEST SUITE")
    sys.exit(exit_code)
