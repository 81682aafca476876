import numpy as np
import pytest

_CRITERIA = {}


def record_criterion(number: int, passed: bool, detail: str) -> str:
    """Remember an acceptance outcome for the end-of-run summary and return its line."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    _CRITERIA[number] = line
    print(line)
    return line


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
