import time
from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("suite", deadline=None, max_examples=50, derandomize=True)
settings.load_profile("suite")

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture(scope="session")
def small_doc():
    from railflow.scenario import load_scenario

    return load_scenario(SCENARIO_DIR / "small_network.json")


@pytest.fixture(scope="session")
def shuttle_doc():
    from railflow.scenario import load_scenario

    return load_scenario(SCENARIO_DIR / "single_track_shuttle.json")


@pytest.fixture(scope="session")
def three_station_doc():
    from railflow.scenario import load_scenario

    return load_scenario(SCENARIO_DIR / "three_station_line.json")


def _timed_run(doc):
    from railflow.scenario import run

    start = time.perf_counter()
    output = run(doc)
    return output, time.perf_counter() - start


@pytest.fixture(scope="session")
def base_run(small_doc):
    """Solved base fixture plus wall time, shared across the suite."""
    return _timed_run(small_doc)


@pytest.fixture(scope="session")
def tcr_run(small_doc):
    """Base fixture with capacity on E-F withdrawn in period 4."""
    from railflow.scenario import TcrOverride, apply_tcr

    restricted = apply_tcr(small_doc, [TcrOverride(link="E-F", period=4, capacity=0.0)])
    return _timed_run(restricted)


@pytest.fixture(scope="session")
def shuttle_run(shuttle_doc):
    return _timed_run(shuttle_doc)


@pytest.fixture(scope="session")
def three_station_run(three_station_doc):
    return _timed_run(three_station_doc)
