import pytest

from condlab.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, acceptance_log):
    res = CRITERIA[number]()
    line = res.line()
    acceptance_log.append(line)
    print(line)
    assert res.passed, line
