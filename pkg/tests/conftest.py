from __future__ import annotations

import numpy as np
import pytest

from manetsec import CbrTraffic, SimConfig, WorldConfig


def desk_world(seed: int = 0, **kw) -> WorldConfig:
    base = dict(node_count=50, area=(500.0, 500.0), sim_duration=30.0, seed=seed)
    base.update(kw)
    return WorldConfig(**base)


def line_positions(n: int, spacing: float = 200.0) -> np.ndarray:
    return np.array([[i * spacing, 0.0] for i in range(n)])


@pytest.fixture
def chain_config():
    def make(n=4, duration=20.0, seed=1, **kw):
        world = WorldConfig(node_count=n, area=(1000.0, 1000.0), sim_duration=duration,
                            seed=seed, traffic=CbrTraffic(pairs=1))
        return SimConfig(world=world, **kw)
    return make
