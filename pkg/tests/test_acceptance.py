"""One test per acceptance criterion; each prints a PASS/FAIL line with its measured detail."""

from __future__ import annotations

import pytest

from lerchlab.acceptance import CRITERIA, run_criterion

RESULTS: list = []


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n:02d}_{CRITERIA[n][0].replace(' ', '_')}")
def test_criterion(number):
    result = run_criterion(number)
    RESULTS.append(result)
    print(result.line())
    assert result.seconds <= result.limit, result.line()
    assert result.passed, result.line()
