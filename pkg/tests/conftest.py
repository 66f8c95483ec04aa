import os

import pytest

from qdcascade.model import PhysicalParams
from qdcascade.pulses import calibrate_pi
from qdcascade.solver import SolverConfig

# The hypothesis profile keeps property tests fast and reproducible on one core.
try:
    from hypothesis import settings

    settings.register_profile("ci", max_examples=40, deadline=None, derandomize=True)
    settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))
except ImportError:  # pragma: no cover
    pass


@pytest.fixture(scope="session")
def params():
    return PhysicalParams()


@pytest.fixture(scope="session")
def tight():
    """Tolerances for dissipation-free runs, whose pure states sit on the positivity boundary."""
    return SolverConfig(rtol=1e-9, atol=1e-11)


@pytest.fixture(scope="session")
def cal_full(params):
    return calibrate_pi(params)


@pytest.fixture(scope="session")
def cal_closed(params, tight):
    return calibrate_pi(params.closed(), config=tight)


_ACCEPTANCE_LINES: list[tuple[str, str]] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Record ``(criterion, line)``; all lines are printed after the run."""
    def record(criterion: str, passed: bool, text: str):
        _ACCEPTANCE_LINES.append((criterion, f"[{'PASS' if passed else 'FAIL'}] {criterion}: {text}"))
        print(_ACCEPTANCE_LINES[-1][1])
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES, key=lambda item: item[0]):
        terminalreporter.write_line(line)
