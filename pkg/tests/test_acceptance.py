"""Acceptance criteria 1-11 at their stated budgets and tolerances.

Each test prints one PASS/FAIL line, bypassing output capture.
"""

import pytest

from percolab.acceptance import CRITERIA, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = run_criterion(number)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.detail
