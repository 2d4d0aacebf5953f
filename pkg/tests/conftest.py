import pytest

from helpers import ACCEPTANCE_LINES, format_line


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for entry in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(format_line(*entry))
