import numpy as np
import pytest

from spinamp.spin_system import SpinSpecies

_ACCEPTANCE = []


@pytest.fixture
def H():
    return SpinSpecies("H", 42.577)


@pytest.fixture
def F():
    return SpinSpecies("F", 40.05)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion():
    """Record a pass/fail line for the acceptance report, then assert."""

    def check(number, description, ok, detail=""):
        _ACCEPTANCE.append((number, description, bool(ok), detail))
        assert ok, f"criterion {number}: {description} ({detail})"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {description}  {detail}")
