import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from helpers import ACCEPTANCE_LINES  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", help="run slow benchmark criteria")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow") or os.environ.get("PCMAPF_SLOW"):
        return
    skip = pytest.mark.skip(reason="slow; pass --runslow or set PCMAPF_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
