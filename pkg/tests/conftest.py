"""Shared fixtures and the acceptance summary printed at the end of a run.

Expensive experiments (the 64^2 pair matrix, the noise sweep, the Lyapunov
spectra, the high-dimensional run) are session fixtures so the acceptance
tests and the slow property tests share one computation each.
"""

import time

import pytest

from tanksep.attractors import SYSTEM_NAMES, lyapunov_spectrum
from tanksep.pipeline import ExperimentConfig, highdim_config, noise_sweep, run_matrix, run_separation
from tanksep.tank import TankConfig

DESK_GRID = 64
HIGHDIM_GRID = 128
NOISE_SIGMAS = (0.01, 0.1, 1.0)
LYAPUNOV_TIME = 2000.0

_RESULTS = {}
_ORDER = []
# wall-clock seconds of the shared experiments, for the runtime targets
TIMINGS = {}


def pytest_collection_finish(session):
    # after deselection, so only the criteria that will run are listed
    _ORDER[:] = [it.nodeid for it in session.items if it.get_closest_marker("acceptance")]


@pytest.fixture
def criterion(request):
    """Record the one-line outcome of an acceptance criterion."""

    def record(label, passed, detail=""):
        _RESULTS[request.node.nodeid] = (label, bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ORDER:
        return
    passed = {r.nodeid for r in terminalreporter.stats.get("passed", [])}
    terminalreporter.section("acceptance criteria")
    for nodeid in _ORDER:
        name = nodeid.split("::")[-1]
        if nodeid in _RESULTS:
            label, ok, detail = _RESULTS[nodeid]
            ok = ok and nodeid in passed
        else:
            label, ok, detail = name, False, "not run or errored before the check"
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")


@pytest.fixture(scope="session")
def desk_config():
    return ExperimentConfig(tank=TankConfig(nx=DESK_GRID, ny=DESK_GRID))


@pytest.fixture(scope="session")
def matrix64(desk_config):
    """All 21 pairs at 64^2 with the full results kept."""
    start = time.perf_counter()
    mat = run_matrix(desk_config, keep_results=True)
    TIMINGS["matrix64"] = time.perf_counter() - start
    return mat


@pytest.fixture(scope="session")
def noise64(desk_config):
    """Off-diagonal matrices at each noise level (sigma=0 comes from ``matrix64``)."""
    return noise_sweep(desk_config, NOISE_SIGMAS, include_diagonal=False)


@pytest.fixture(scope="session")
def lyapunov_all():
    out = {}
    for name in SYSTEM_NAMES:
        start = time.perf_counter()
        out[name] = lyapunov_spectrum(name, total_time=LYAPUNOV_TIME)
        TIMINGS[f"lyapunov_{name}"] = time.perf_counter() - start
    return out


@pytest.fixture(scope="session")
def highdim_result():
    cfg = highdim_config(HIGHDIM_GRID)
    return run_separation(cfg)
