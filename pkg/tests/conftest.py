from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from motorhom.model import build_model  # noqa: E402

PRESET_NAMES = ("flat", "symmetric", "asymmetric-ratchet")


@pytest.fixture(scope="session")
def flat():
    return build_model("flat")


@pytest.fixture(scope="session")
def symmetric():
    return build_model("symmetric")


@pytest.fixture(scope="session")
def asym():
    return build_model("asymmetric-ratchet")


@pytest.fixture(scope="session")
def twopot():
    return build_model("two-potential")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k])
