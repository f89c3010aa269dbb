"""Shared expensive fixtures and the acceptance summary printed after the run."""
import pytest

from hhflow.algebra import FlowParameters
from hhflow.baseline import diagonalize
from hhflow.dynamics import build_frame

from reference import INCOMMENSURATE

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def incommensurate():
    return FlowParameters.make(**INCOMMENSURATE)


@pytest.fixture(scope="session")
def frame(incommensurate):
    """Order-6 dressed frame with order-10 energies (about a minute to build)."""
    return build_frame(incommensurate, K=6, energy_order=10)


@pytest.fixture(scope="session")
def baseline30(incommensurate):
    return diagonalize(incommensurate, 30, 30)


@pytest.fixture(scope="session")
def acceptance_report():
    def report(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
