import json
from pathlib import Path

import pytest

from optverifier.agents.library import worked_model
from optverifier.compile import SolverConfig
from optverifier.compile.solvers import find_cbc
from optverifier.model_ir import ProblemInstance

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(__file__).parents[1] / "src" / "optverifier" / "data"


def instances() -> dict[str, ProblemInstance]:
    out = {}
    for line in (DATA / "instances.jsonl").read_text().splitlines():
        doc = json.loads(line)
        out[doc["id"]] = ProblemInstance(**doc)
    return out


@pytest.fixture(scope="session")
def problems():
    return instances()


@pytest.fixture
def knapsack():
    return worked_model("knapsack")


@pytest.fixture
def fishery():
    return worked_model("fishery")


@pytest.fixture
def warehouse():
    return worked_model("warehouse")


@pytest.fixture
def maxflow():
    return worked_model("maxflow")


@pytest.fixture(scope="session")
def fast_solver():
    return SolverConfig.named("highs-inprocess")


@pytest.fixture(scope="session")
def cbc_solver():
    if find_cbc() is None:
        pytest.skip("no CBC executable available")
    return SolverConfig.named("cbc")


# ------------------------------------------------------------------ acceptance reporting

CRITERIA: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if report.failed:
        CRITERIA[name] = "FAIL"
    elif report.skipped and name not in CRITERIA:
        CRITERIA[name] = "SKIP"
    elif report.when == "call" and report.passed:
        CRITERIA.setdefault(name, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in CRITERIA.items():
        terminalreporter.write_line(f"{verdict} {name}")
