import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fas_mobo.config_space import SpaceSpec
from fas_mobo.scenario import ScenarioParams, random_dynamic_scene, random_scene

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def tiny_space():
    """2x2 grid, one tx and one rx port, one orientation and beam: 12 configurations."""
    return SpaceSpec(2, 2, 1, 1, 1, 1, 1, 0.5)


@pytest.fixture
def small_space():
    """3x3 grid with a few orientations and beams: 9*8*2*2 = 288 configurations."""
    return SpaceSpec(3, 3, 1, 1, 1, 2, 2, 0.5)


@pytest.fixture
def bench_space():
    return SpaceSpec(4, 4, 2, 2, 1, 4, 8, 0.5)


@pytest.fixture
def two_user_space():
    return SpaceSpec(4, 4, 2, 3, 2, 8, 4, 0.5)


@pytest.fixture
def small_scene(small_space):
    return random_scene(small_space, ScenarioParams(n_targets=1), np.random.default_rng(3))


@pytest.fixture
def two_user_scene(two_user_space):
    return random_scene(two_user_space, ScenarioParams(), np.random.default_rng(5))


@pytest.fixture
def small_dynamic(small_space):
    return random_dynamic_scene(small_space, ScenarioParams(n_targets=1), np.random.default_rng(11))


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance_log(request):
    """Criterion number -> one-line verdict, printed together at the end of the session."""
    return request.config.stash.setdefault(ACCEPTANCE_KEY, {})


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for key in sorted(lines):
            terminalreporter.write_line(lines[key])
