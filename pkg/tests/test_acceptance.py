"""Acceptance criteria: one pass/fail line per criterion.

Run ``pytest tests/test_acceptance.py -s`` (or ``legendre verify``) to see the lines.
"""

import pytest

from legendre_methods.acceptance import CRITERIA, SUITES, resolve_suite, run_criterion, verify
from legendre_methods.errors import ConfigError


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=[f"{n:02d}-{CRITERIA[n][0]}" for n in sorted(CRITERIA)])
def test_criterion(number, capsys):
    result = run_criterion(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail


def test_twelve_criteria():
    assert sorted(CRITERIA) == list(range(1, 13))
    assert SUITES["all"] == tuple(range(1, 13))


def test_suite_resolution():
    assert resolve_suite("sc_newton") == (7, 8, 9)
    assert resolve_suite("mbf-rate") == (6,)
    assert resolve_suite("10") == (10,)
    with pytest.raises(ConfigError):
        resolve_suite("13")


def test_failures_are_reported_not_raised(monkeypatch):
    def boom():
        raise RuntimeError("broken")

    monkeypatch.setitem(CRITERIA, 12, ("three-point", boom))
    r = run_criterion(12)
    assert not r.passed
    assert r.line().startswith("[FAIL] 12 three-point")


def test_parallel_matches_serial():
    serial = [r.passed for r in verify("transforms")]
    assert serial == [r.passed for r in verify("transforms", jobs=2)]
