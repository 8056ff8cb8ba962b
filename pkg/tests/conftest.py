import pytest

from netaural.graphs import from_edges


@pytest.fixture
def p3():
    return from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def star4():
    return from_edges(4, [(0, 1), (0, 2), (0, 3)])


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
