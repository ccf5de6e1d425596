import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from radioalloc.utility import default_ues  # noqa: E402


@pytest.fixture
def cell():
    """Default six-UE cell under the first usage row."""
    return default_ues("alpha_1")


@pytest.fixture
def R():
    return 180.0


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
