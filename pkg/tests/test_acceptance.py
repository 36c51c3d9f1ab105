"""Numbered acceptance criteria, one test per criterion, each at its stated
tolerance. Run with ``pytest -s`` to see the one-line summaries."""

import pytest

from qdarwin import validation


@pytest.mark.parametrize("check", validation.CHECKS, ids=lambda c: f"criterion_{c.number:02d}")
def test_criterion(check):
    result = check()
    print(result.line())
    assert result.passed, result.line()
