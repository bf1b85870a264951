"""Acceptance criteria, one test per criterion.

Each check runs at its stated tolerance and time budget and prints a single
PASS/FAIL line with its margin. Run standalone for the bare table:

    python3 tests/test_acceptance.py
"""

import sys

import pytest

from oscillab.verify import CHECKS

NAMES = {
    "1": "extremal_exactness",
    "2": "beta_sharpness",
    "3": "p2_identity",
    "4": "c_infty_formula",
    "5": "median_suite",
    "6": "rearrangement_suite",
    "7": "truncation_suite",
    "8": "jn_pipeline",
    "9": "product_decomposition",
    "10": "separation_regression",
    "11": "performance_kernel",
}


@pytest.mark.parametrize("key", list(CHECKS), ids=[f"criterion_{k}_{NAMES[k]}" for k in CHECKS])
def test_criterion(key, capsys):
    result = CHECKS[key]()
    with capsys.disabled():
        print(f"\n[{key:>2}] {result.line()}")
        for msg in result.failures[:5]:
            print(f"       {msg}")
    assert result.passed, result.failures[:5]
    assert result.in_time, f"{result.seconds:.2f}s exceeds the {result.limit:.0f}s budget"


if __name__ == "__main__":
    failed = 0
    for key, check in CHECKS.items():
        r = check()
        print(f"[{key:>2}] {r.line()}")
        failed += not (r.passed and r.in_time)
    sys.exit(1 if failed else 0)
