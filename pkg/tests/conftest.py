import pytest

from fleettwin.cli import resolve_scenario
from fleettwin.engine import run_scenario
from fleettwin.scenario import load_scenario


@pytest.fixture(scope="session")
def m3_run(tmp_path_factory):
    log = tmp_path_factory.mktemp("m3") / "run.jsonl"
    scenario = load_scenario(resolve_scenario("m3"))
    return run_scenario(scenario, log_path=log), log


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    log = tmp_path_factory.mktemp("default") / "run.jsonl"
    scenario = load_scenario(resolve_scenario("default"))
    return run_scenario(scenario, log_path=log), log
