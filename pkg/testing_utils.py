"""
Shared helpers for the test scripts. Every test_*.py file runs under pytest and
also directly (python test_grid_core.py) with banner output and an exit code.
"""

import traceback
from typing import Any, Dict

import numpy as np

from grid_core import Axis, ProductGrid


class TestResults:
    """Track test results"""
    __test__ = False

    def __init__(self):
        self.tests = {}

    def add(self, test_name, passed, message=""):
        self.tests[test_name] = {'passed': passed, 'message': message}

    def summary(self):
        total = len(self.tests)
        passed = sum(1 for t in self.tests.values() if t['passed'])
        return total, passed, total - passed


def run_module_tests(namespace: Dict[str, Any], title: str) -> int:
    """Run every test_* function of a module; 0 when all pass"""
    print("\n" + "=" * 80)
    print(title)
    print("=" * 80)

    results = TestResults()
    tests = [(name, fn) for name, fn in namespace.items() if name.startswith('test_') and callable(fn)]
    for test_name, fn in tests:
        try:
            fn()
            results.add(test_name, True)
        except Exception as e:
            results.add(test_name, False, f"{type(e).__name__}: {e}")
            traceback.print_exc()

    for test_name, result in results.tests.items():
        status = "✅ PASSED" if result['passed'] else "❌ FAILED"
        print(f"{test_name:.<70} {status}")
        if result['message']:
            print(f"    {result['message']}")

    total, passed, failed = results.summary()
    print("=" * 80)
    print(f"Total: {total}   Passed: {passed}   Failed: {failed}")
    print("=" * 80)
    return 0 if failed == 0 else 1


def random_grid(rng: np.random.Generator, shape) -> ProductGrid:
    """Grid with random cell widths and weights"""
    axes = []
    for size in shape:
        edges = np.concatenate(([0.0], np.cumsum(rng.uniform(0.2, 1.5, size))))
        axes.append(Axis(0.5 * (edges[:-1] + edges[1:]), rng.uniform(0.1, 2.0, size), edges))
    return ProductGrid(tuple(axes))
