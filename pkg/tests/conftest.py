import numpy as np
import pytest

from expand_sparsify.projection import ProjectionMatrix

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def explicit(rows):
    return ProjectionMatrix(np.asarray(rows, dtype=float))
