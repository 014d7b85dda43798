import numpy as np
import pytest

from entcert.linalg import PureState, SystemShape


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def bell():
    return PureState(np.array([1, 0, 0, 1]) / np.sqrt(2), SystemShape((2, 2), ("R", "Q")))


def h2(x):
    """Binary entropy in bits, evaluated from the scalar formula."""
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * np.log2(x) - (1 - x) * np.log2(1 - x))


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
