from pathlib import Path

import pytest

from rcmpsp.instance import load_instance

DATA = Path(__file__).parent / "data"


@pytest.fixture
def t1_path():
    return DATA / "T1.rcmp"


@pytest.fixture
def t1(t1_path):
    return load_instance(t1_path)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
