import numpy as np
import pytest

from abmgc.core import SeriesKind, TrajectorySeries


def straight_movers(p=3, T=40, dt=0.01, speed=1.0, gap=3.0):
    """Agents side by side moving in parallel along +x at constant speed."""
    t = np.arange(T)[:, None]
    pos = np.zeros((T, p, 2))
    pos[:, :, 0] = speed * dt * t
    pos[:, :, 1] = gap * np.arange(p)[None, :]
    vel = np.zeros_like(pos)
    vel[:, :, 0] = speed
    return TrajectorySeries(np.concatenate([pos, vel], axis=2), dt)


def phase_series(T=30, p=3, seed=0):
    g = np.random.default_rng(seed)
    phi = np.cumsum(g.uniform(0.01, 0.1, (T, p)), axis=0)
    dphi = g.normal(size=(T, p))
    return TrajectorySeries(np.stack([phi, dphi], axis=2), 0.01, SeriesKind.PHASE,
                            static=g.uniform(1, 10, p))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
