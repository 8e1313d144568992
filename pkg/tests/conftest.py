import sys
import numpy as np
import pytest

from regime_pd.config import load_preset
from regime_pd.rbf_basis import CollocationGrid, uniform_grid


def barrier_grid(x_min, x_max, n, k=-0.1):
    """Uniform grid shifted so k sits half way between two nodes."""
    g = uniform_grid(x_min, x_max, n)
    j = int(np.searchsorted(g.nodes, k))
    shift = k - 0.5 * (g.nodes[j - 1] + g.nodes[j])
    return CollocationGrid(g.nodes + shift, x_min + shift, x_max + shift)


@pytest.fixture(scope="session")
def socgen():
    return load_preset("socgen_vg").build_model()


@pytest.fixture(scope="session")
def cgmy5():
    return load_preset("cgmy5").build_model()


@pytest.fixture(scope="session")
def kobol3():
    return load_preset("kobol3").build_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
