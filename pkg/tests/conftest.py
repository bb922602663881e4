import numpy as np
import pytest

# one summary line per acceptance criterion, filled in by test_acceptance.py
CRITERIA: dict = {}


def record_criterion(num: int, ok: bool, detail: str) -> None:
    CRITERIA[num] = (ok, detail)
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        ok, detail = CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
