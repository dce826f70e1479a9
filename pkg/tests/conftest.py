import os
import time

# every model built during the suite checks the mass ledger after each event
os.environ.setdefault("RCCSIM_AUDIT", "1")

import pytest  # noqa: E402
from hypothesis import settings  # noqa: E402

from rccsim.config import case_study  # noqa: E402
from rccsim.scenarios import rank, run_adaptive, run_fixed, sweep  # noqa: E402

# fixed example sequences keep the suite reproducible run to run
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

CRITERIA = {
    "test_a1_oracle_equivalence": "A1 oracle equivalence on small fixed-travel instances",
    "test_a2_mass_conservation": "A2 mass ledger holds at every event",
    "test_a3_structural_reproduction": "A3 accepted makespans equal, fleet x utilization stable, winner",
    "test_a4_calibration": "A4 calibrated makespan within 0.5% of the reference duration",
    "test_a5_constraint_monitors": "A5 planted violations found exactly",
    "test_a6_adaptive_improvement": "A6 adaptive fleet beats the fixed fleet; infinite band is identity",
    "test_a7_geometry_properties": "A7 geometry properties over 1000 random roads",
    "test_a8_determinism": "A8 byte-identical scenario tables across reruns and workers",
}
_outcomes: dict[str, str] = {}


@pytest.fixture(scope="session")
def cfg():
    return case_study()


@pytest.fixture(scope="session")
def sweep_run(cfg):
    t0 = time.perf_counter()
    results = sweep(cfg)
    elapsed = time.perf_counter() - t0
    return results, elapsed


@pytest.fixture(scope="session")
def sweep_results(sweep_run):
    return sweep_run[0]


@pytest.fixture(scope="session")
def winner(sweep_results):
    return rank(sweep_results)[0]


@pytest.fixture(scope="session")
def adaptive_pair(cfg, winner):
    """(adaptive run, controller, fixed run) seeded with the sweep winner."""
    run, ctl = run_adaptive(cfg, winner.scenario.fleet)
    base = run_fixed(cfg, winner.scenario.fleet, engine="reference")
    return run, ctl, base


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1].split("[", 1)[0]
    if name not in CRITERIA:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        # a parametrized criterion passes only if every case does
        if _outcomes.get(name) != "FAIL":
            _outcomes[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in CRITERIA.items():
        if name in _outcomes:
            terminalreporter.write_line(f"{_outcomes[name]}  {label}")
