import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cellsearch.model import NetworkParams  # noqa: E402


@pytest.fixture
def defaults():
    return NetworkParams()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
