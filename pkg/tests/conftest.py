import numpy as np
import pytest

from quincunx.hilbert import LatticeParams, ModeSpace, coherent_state_truncated
from quincunx.lindblad import run_open_walk
from quincunx.measurement import reduce_field
from quincunx.walk import WalkConfig, run_classical_walk, run_ideal_walk

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def space31():
    return ModeSpace(31)


@pytest.fixture(scope="session")
def space8():
    return ModeSpace(8)


@pytest.fixture(scope="session")
def coherent5(space31):
    return coherent_state_truncated(space31, 5.0)


@pytest.fixture(scope="session")
def reference_walks(coherent5):
    """Field states for alpha=5, d=31 over 15 steps: ideal QW, ensemble RW and lossy QWs."""
    lattice = LatticeParams(5.0, 31)
    cfg = WalkConfig(lattice, 15)
    qw = [reduce_field(np.outer(s, s.conj())) for s in run_ideal_walk(cfg, coherent5)]
    rw = run_classical_walk(cfg, coherent5)
    lossy = {}
    for g in (0.0, 0.005, 0.01, 0.02, 0.05):
        states = run_open_walk(WalkConfig(lattice, 15, loss_g=g), coherent5)
        lossy[g] = states
    return {"qw": qw, "rw": rw, "open": lossy}
