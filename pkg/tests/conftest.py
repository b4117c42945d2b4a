import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from emcris.sim.config import ScenarioConfig
from emcris.sim.scenario import Scenario

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def toy_config(**kw):
    base = dict(N=2, N_J=2, K=2, Q=1, M_h=2, M_v=2, trials=2, mc_draws=300)
    base.update(kw)
    return ScenarioConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_scenario():
    return Scenario(toy_config(), 0)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
