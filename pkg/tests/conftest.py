import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ipminer.config import PRESETS
from ipminer.geometry import InteractionParams
from ipminer.trajectory import AgentSeries, TimeScope, TrajectoryDataset, derive_kinematics

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_PARAM_FIELDS = set(InteractionParams.__dataclass_fields__)


def preset_params(name: str) -> InteractionParams:
    return InteractionParams(**{k: v for k, v in PRESETS[name].items() if k in _PARAM_FIELDS})


def random_corridor(seed: int, n: int | None = None, length: int | None = None,
                    staggered: bool = True) -> TrajectoryDataset:
    """Pedestrians drifting along a 60 x 10 m corridor, all heading roughly +x."""
    rng = np.random.default_rng(seed)
    n = n if n is not None else int(rng.integers(5, 31))
    length = length if length is not None else int(rng.integers(200, 501))
    tick = 0.04
    agents = {}
    for a in range(n):
        if staggered:
            start = int(rng.integers(0, length // 3))
            end = int(rng.integers(2 * length // 3, length))
        else:
            start, end = 0, length - 1
        k = np.arange(end - start + 1)
        speed = rng.uniform(1.0, 1.6)
        drift = np.cumsum(rng.normal(0.0, 0.002, len(k)))
        x = rng.uniform(0, 40 if staggered else 60) + speed * tick * k
        y = rng.uniform(0, 8 if staggered else 10) + np.cumsum(drift) * tick * 5
        agents[a] = AgentSeries(a, start, x, y, None, None)
    return derive_kinematics(TrajectoryDataset(TimeScope(length - 1, tick), agents, 0.6))


@pytest.fixture
def ngsim_params():
    return preset_params("ngsim")


@pytest.fixture
def campus_params():
    return preset_params("campus")


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
