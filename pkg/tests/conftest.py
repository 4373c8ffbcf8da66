import json
from pathlib import Path

import pytest

from storage_ssc import build_model
from storage_ssc.boundaries import build_table

FROZEN = json.loads((Path(__file__).parent / "oracle" / "frozen.json").read_text())

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def model():
    return build_model(0.5, 0.4)


@pytest.fixture(scope="session")
def table(model):
    return build_table(model, [k / 100 for k in range(101)])


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
