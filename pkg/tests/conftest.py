import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from normlab import latentgen, network

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SIM_SEEDS = range(5)

ACCEPTANCE_LINES: list[str] = []
TRAIN_SECONDS: dict[bool, float] = {}


def _train_runs(imbalance):
    start = time.perf_counter()
    runs = []
    for seed in SIM_SEEDS:
        ds = latentgen.generate(latentgen.LatentSpec(imbalance=imbalance, seed=seed))
        params, traces = network.train(ds, network.TrainConfig(seed=seed))
        runs.append((ds, params, traces, network.forward(params, ds.observations)))
    TRAIN_SECONDS[imbalance] = time.perf_counter() - start
    return runs


@pytest.fixture(scope="session")
def balanced_runs():
    return _train_runs(False)


@pytest.fixture(scope="session")
def imbalanced_runs():
    return _train_runs(True)


@pytest.fixture(scope="session")
def trained(balanced_runs):
    ds, params, traces, Z = balanced_runs[0]
    return ds, Z


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
