import numpy as np
import pytest

from tga.graphs import TimeSeries, build_graph

ACCEPTANCE_LINES: list[str] = []


def toy_graph(seed: int, n: int = 6, t: int = 40):
    rng = np.random.default_rng(seed)
    mix = rng.normal(size=(n, n))
    data = rng.normal(size=(t, n)) @ mix
    return build_graph(TimeSeries(f"toy-{seed}", data))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def graph6():
    return toy_graph(0)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion for the summary."""

    def record(criterion: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
