import math

import numpy as np
import pytest

from nsplab.model import PhysParams
from nsplab.spectral import Grid

# criterion id -> (description, outcome); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def params():
    return PhysParams(mu=1.0, lam=0.0)


@pytest.fixture
def grid16():
    return Grid(16, 2 * math.pi)


@pytest.fixture
def grid32():
    return Grid(32, 2 * math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        desc, ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {cid:2d}  {desc}  [{detail}]")
