import pytest

from ffrsim import compare_strategies, default_document

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def doc():
    return default_document()


@pytest.fixture(scope="session")
def comparison(doc):
    """Default 4 x 4 strategy/case matrix, shared across modules."""
    return compare_strategies(doc.base_scenario(), jobs=4)


@pytest.fixture(scope="session")
def case_runs(comparison):
    return {c: comparison.results[("adaptive", c)] for c in (1, 2, 3, 4)}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
