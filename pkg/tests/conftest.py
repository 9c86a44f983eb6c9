import numpy as np
import pytest

from leo_precoding.antenna import ArrayGeometry, ElementModel
from leo_precoding.channel import LinkParams
from leo_precoding.geometry import SatelliteState

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sat():
    return SatelliteState.circular(600e3)


@pytest.fixture(scope="session")
def small_array():
    return ArrayGeometry.planar(4, 4, 2e9)


@pytest.fixture(scope="session")
def link(small_array):
    return LinkParams(small_array, ElementModel("cosine", 10.7), 30e6)


@pytest.fixture
def report():
    """Collects one pass/fail line per acceptance criterion."""
    def _report(number: int, name: str, ok: bool, detail: str = ""):
        status = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(f"criterion {number:2d} {status}: {name}"
                                + (f" ({detail})" if detail else ""))
        print(ACCEPTANCE_LINES[-1])
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
