"""One test per acceptance criterion; each prints its verdict line."""

import pytest

from il_lab.acceptance import CRITERIA

from conftest import VERDICT_LINES


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    verdict = CRITERIA[number]()
    print(verdict.line())
    VERDICT_LINES.append(verdict.line())
    assert verdict.passed, verdict.line()
