"""Acceptance criteria 1-10, each at its stated tolerance and time budget.

Every criterion prints one ``PASS``/``FAIL`` line straight to the terminal
(also under output capture).
"""
import json
import subprocess
import sys

import pytest

from carnot_kit.suite import CRITERIA, worked_examples

# seconds allowed per criterion
BUDGETS = {1: 1, 2: 1, 3: 1, 4: 10, 5: 1, 6: 10, 7: 1, 8: 5, 9: 180}


def report(capsys, label, passed, seconds, extra=""):
    with capsys.disabled():
        print(f"\n{'PASS' if passed else 'FAIL'}  {label}  ({seconds:.2f}s){extra}")


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(capsys, k):
    res = CRITERIA[k](seed=0)
    within = res.seconds < BUDGETS[k]
    report(capsys, f"criterion {k}: {res.name}", res.passed and within, res.seconds)
    assert res.passed, json.dumps(res.details, default=str)[:2000]
    assert within, f"took {res.seconds:.1f}s, budget {BUDGETS[k]}s"


def test_worked_examples(capsys):
    res = worked_examples()
    failed = [name for name, ok in res.details["checks"].items() if not ok]
    report(capsys, "worked examples", res.passed, res.seconds)
    assert res.passed, failed


def test_criterion_10_cli_suite(capsys):
    proc = subprocess.run(
        [sys.executable, "-m", "carnot_kit", "paper-suite"],
        capture_output=True,
        text=True,
        check=False,
    )
    payload = json.loads(proc.stdout)
    names = [r["name"] for r in payload["results"]]
    ok = proc.returncode == 0 and payload["all_passed"] and all(any(n.startswith(f"{k}.") for n in names) for k in CRITERIA)
    report(capsys, "criterion 10: paper-suite CLI exits 0", ok, sum(r["seconds"] for r in payload["results"]))
    assert ok, proc.stderr or proc.stdout[-2000:]
