import sys
import warnings

import numpy as np
import pytest
from hypothesis import settings

from halfflow.grid import make_grid

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


@pytest.fixture
def g1():
    return make_grid(1, 2 * np.pi, 256)


@pytest.fixture
def g2():
    return make_grid(2, 2 * np.pi, 64)


@pytest.fixture(autouse=True)
def _quiet_data_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="data seminorm estimate")
        yield


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance checks")
    for r in mod.RESULTS.values():
        terminalreporter.write_line(r.line())
