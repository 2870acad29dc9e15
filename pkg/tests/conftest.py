import numpy as np
import pytest

from cnnpath import GridParams, nominal_curve, stable_states

_VERDICTS = []


@pytest.fixture(scope="session")
def curve():
    return nominal_curve()


@pytest.fixture(scope="session")
def states(curve):
    return stable_states(curve, 21.0)


@pytest.fixture
def params():
    return GridParams()


@pytest.fixture
def verdict():
    """Record a one-line pass/fail verdict for the end-of-run summary."""

    def record(label, ok, detail=""):
        _VERDICTS.append(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)


def pytest_configure(config):
    np.seterr(all="ignore")
