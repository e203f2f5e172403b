"""Acceptance gate: runs the selftest CLI once (criteria 1-13 end to end) and
asserts every criterion's records, printing one pass/fail line per criterion.
Run with `pytest -s tests/test_acceptance.py` to see the lines live.
"""

import subprocess
import sys
import time

import pytest

from emdlsh.acceptance import CRITERIA
from emdlsh.report import parse_report

SELFTEST_TIMEOUT = 1800  # the acceptance budget: 30 minutes


@pytest.fixture(scope="module")
def selftest(tmp_path_factory):
    out = tmp_path_factory.mktemp("selftest") / "selftest_report.txt"
    started = time.time()
    proc = subprocess.run(
        [sys.executable, "-m", "emdlsh.cli", "selftest", "--out", str(out)],
        capture_output=True, text=True, timeout=SELFTEST_TIMEOUT + 120,
        cwd=out.parent)
    wall = time.time() - started
    sys.stdout.write(proc.stdout)
    records = parse_report(out.read_text()) if out.exists() else []
    return {"proc": proc, "records": records, "wall": wall, "out": out}


@pytest.mark.parametrize("number,title",
                         [(num, title) for num, title, _ in CRITERIA])
def test_criterion(selftest, number, title):
    recs = [r for r in selftest["records"]
            if r.get("criterion") == str(number)]
    assert recs, f"criterion {number} produced no records"
    failed = [r["record"] for r in recs if r["verdict"] != "pass"]
    verdict = "PASS" if not failed else "FAIL"
    print(f"criterion {number:2d} [{verdict}] {title}")
    assert not failed, f"criterion {number} failed records: {failed}"


def test_criterion_14_selftest_cli(selftest):
    ok = selftest["proc"].returncode == 0 and selftest["wall"] < SELFTEST_TIMEOUT
    print(f"criterion 14 [{'PASS' if ok else 'FAIL'}] selftest CLI "
          f"(exit={selftest['proc'].returncode}, wall={selftest['wall']:.0f}s)")
    assert selftest["proc"].returncode == 0, selftest["proc"].stdout[-2000:]
    assert selftest["wall"] < SELFTEST_TIMEOUT
    assert any(line.startswith("criterion 13")
               for line in selftest["proc"].stdout.splitlines())
