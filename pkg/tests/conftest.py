import warnings

import numpy as np
import pytest

from dde.errors import ImaginaryResidualWarning
from dde.fixtures import heisenberg_mixture



@pytest.fixture(autouse=True)
def _quiet_expected_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ImaginaryResidualWarning)
        warnings.filterwarnings("ignore", message="time step exceeds")
        yield


@pytest.fixture(scope="session")
def small_instance():
    """6-qubit Heisenberg ring in a three-level eigen-mixture."""
    return heisenberg_mixture(n_qubits=6, populations=(0.7, 0.2, 0.1), seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: dict = {}


@pytest.fixture
def report(request):
    """Record the PASS/FAIL line of the acceptance criterion marked on the test."""
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args if marker else (0, request.node.name)
    done = []

    def _report(ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title} | {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        done.append(ok)
        return ok

    yield _report
    if not done:
        _ACCEPTANCE[number] = f"criterion {number:2d}: FAIL  {title} | raised before reporting"


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
