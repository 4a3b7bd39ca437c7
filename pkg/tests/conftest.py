import numpy as np
import pytest

# acceptance criteria register their verdicts here; printed at session end
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion and echo it."""
    def record(number, title, passed, detail=""):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}"
        if detail:
            line += f": {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


@pytest.fixture
def illness_death():
    """Three states with recovery; state 3 (index 2) absorbing."""
    return np.array([[0.0, 0.8, 0.2], [0.3, 0.0, 0.7], [0.0, 0.0, 0.0]])
