from __future__ import annotations

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from nanorevival import physcore, rotorstate  # noqa: E402
from nanorevival.constants import K_B  # noqa: E402

# Depth of the orientational trap used for the released-rotor traces: 0.5 K.
FIG2_DEPTH = K_B * 0.5

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cnt():
    return physcore.get_preset("CNT").rotor


@pytest.fixture(scope="session")
def fig2_trap():
    return physcore.TrapSpec(5.0, 30e-6, depth_override=FIG2_DEPTH)


@pytest.fixture(scope="session")
def cnt_state_100uk(cnt, fig2_trap):
    return rotorstate.prepare_exact(cnt, fig2_trap, 100e-6)


@pytest.fixture(scope="session")
def cnt_state_1mk(cnt, fig2_trap):
    return rotorstate.prepare_exact(cnt, fig2_trap, 1e-3)


@pytest.fixture(scope="session")
def small_state():
    """kT = 2 B, V0 = 10 B in a j <= 8 basis, eigenvectors kept."""
    return rotorstate.thermal_state(2.0, 10.0, rotorstate.BasisTruncation(j_max=8, tail_epsilon=1e-2),
                                    keep_vectors=True)
