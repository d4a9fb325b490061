"""Zone-based (repulsion / orientation / attraction) boids with signed, directed rules.

``relations[i, j]`` is the effect of agent i on agent j: +1 attraction,
-1 repulsion, 0 ignored.  A zero relation masks all three zones for that
ordered pair, so agent j never reacts to i.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import CausalGraph, DomainError, Rng, TrajectorySeries

ARENA = 30.0
DT = 0.01
BETA = np.deg2rad(30.0)
R_REPULSE_ATTRACTIVE = 1.0
R_REPULSE_REPULSIVE = 10.0
R_ORIENT = 2.0
R_ATTRACT = 8.0
NOISE_SD = 0.2
MIN_RADIUS = 0.1


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoidState:
    positions: np.ndarray
    directions: np.ndarray


@dataclass(frozen=True)
class BoidWorld:
    """Per-pair radii are indexed ``[source, target]``; noise is drawn per target agent."""

    speed: np.ndarray
    r_r: np.ndarray
    r_o: np.ndarray
    r_a: np.ndarray
    relations: CausalGraph
    initial: BoidState
    beta: float = BETA
    arena: float = ARENA
    dt: float = DT

    @property
    def p(self) -> int:
        return len(self.speed)


def sample_world(p: int, rng: Rng) -> BoidWorld:
    if p < 2:
        raise DomainError("need at least two agents")
    rel = rng.integers(-1, 2, size=(p, p))
    np.fill_diagonal(rel, 0)
    noise = rng.normal(0.0, NOISE_SD, size=(4, p))
    speed = np.maximum(1.0 + noise[0], MIN_RADIUS)
    base_rr = np.where(rel < 0, R_REPULSE_REPULSIVE, R_REPULSE_ATTRACTIVE)
    # noise belongs to the reacting (target) agent, i.e. broadcast along columns
    r_r = np.maximum(base_rr + noise[1][None, :], MIN_RADIUS)
    r_o = np.maximum(np.full((p, p), R_ORIENT) + noise[2][None, :], MIN_RADIUS)
    r_a = np.maximum(np.full((p, p), R_ATTRACT) + noise[3][None, :], MIN_RADIUS)

    radius = rng.uniform(6.0, 16.0)
    angles = rng.uniform(0.0, 2 * np.pi, p)
    center = ARENA / 2
    positions = center + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    heading = rng.uniform(0.0, 2 * np.pi, p)
    directions = np.stack([np.cos(heading), np.sin(heading)], axis=1)
    return BoidWorld(
        speed=speed, r_r=r_r, r_o=r_o, r_a=r_a,
        relations=CausalGraph(rel),
        initial=BoidState(positions, directions),
    )


def _normalize(v: np.ndarray) -> np.ndarray | None:
    n = np.linalg.norm(v)
    if n < 1e-12:
        return None
    return v / n


def desired_direction(world: BoidWorld, state: BoidState, i: int) -> np.ndarray:
    """Direction agent ``i`` wants to take given its visible neighbours."""
    current = state.directions[i]
    repulse, orient, attract = [], [], []
    for j in range(world.p):
        if j == i or world.relations.edges[j, i] == 0:
            continue
        offset = state.positions[j] - state.positions[i]
        dist = np.linalg.norm(offset)
        unit = offset / dist if dist > 0 else np.zeros_like(offset)
        rr, ro, ra = world.r_r[j, i], world.r_o[j, i], world.r_a[j, i]
        if dist < rr:
            repulse.append(unit)
        elif dist < ro:
            orient.append(state.directions[j])
        elif dist < ra:
            attract.append(unit)

    if repulse:
        d = _normalize(-np.mean(repulse, axis=0))
        return current if d is None else d
    terms = [np.mean(z, axis=0) for z in (orient, attract) if z]
    if not terms:
        return current
    d = _normalize(0.5 * sum(terms) if len(terms) == 2 else terms[0])
    return current if d is None else d


def clamp_turn(current: np.ndarray, desired: np.ndarray, beta: float) -> np.ndarray:
    """Turn toward ``desired`` by at most ``beta`` radians.

    An exact reversal has no preferred side and turns counterclockwise.
    """
    cos = float(np.clip(np.dot(current, desired), -1.0, 1.0))
    theta = np.arccos(cos)
    if theta <= beta:
        return desired
    cross = current[0] * desired[1] - current[1] * desired[0]
    angle = beta if cross >= 0 else -beta
    c, s = np.cos(angle), np.sin(angle)
    return np.array([c * current[0] - s * current[1], s * current[0] + c * current[1]])


def _reflect(pos: np.ndarray, d: np.ndarray, arena: float) -> np.ndarray:
    d = d.copy()
    outward = ((pos < 0) & (d < 0)) | ((pos > arena) & (d > 0))
    d[outward] *= -1
    return d


def step(world: BoidWorld, state: BoidState) -> BoidState:
    """Advance one frame: every agent turns (capped) then moves ``speed * dt``."""
    new_dirs = np.empty_like(state.directions)
    for i in range(world.p):
        want = desired_direction(world, state, i)
        turned = clamp_turn(state.directions[i], want, world.beta)
        new_dirs[i] = turned / np.linalg.norm(turned)
    for i in range(world.p):
        new_dirs[i] = _reflect(state.positions[i] + world.speed[i] * new_dirs[i] * world.dt,
                               new_dirs[i], world.arena)
    positions = state.positions + world.speed[:, None] * new_dirs * world.dt
    if not np.all(np.isfinite(positions)):
        raise SimulationError("non-finite agent position")
    return BoidState(positions, new_dirs)


def simulate(world: BoidWorld, T: int) -> TrajectorySeries:
    """Run ``T`` frames; frame t holds positions and the velocity used to reach frame t+1.

    Velocities are ``speed * direction`` so a forward difference of the stored
    positions reproduces them.
    """
    if T < 2:
        raise DomainError("T must be >= 2")
    pos = np.empty((T, world.p, 2))
    vel = np.empty((T, world.p, 2))
    state = world.initial
    pos[0] = state.positions
    for t in range(T):
        nxt = step(world, state)
        vel[t] = world.speed[:, None] * nxt.directions
        if t + 1 < T:
            pos[t + 1] = nxt.positions
        state = nxt
    return TrajectorySeries(np.concatenate([pos, vel], axis=2), world.dt)


def without_agent(world: BoidWorld, k: int) -> BoidWorld:
    """World with agent ``k`` removed (for masking checks)."""
    keep = np.array([i for i in range(world.p) if i != k])
    sub = np.ix_(keep, keep)
    return replace(
        world,
        speed=world.speed[keep], r_r=world.r_r[sub], r_o=world.r_o[sub], r_a=world.r_a[sub],
        relations=CausalGraph(world.relations.edges[sub]),
        initial=BoidState(world.initial.positions[keep], world.initial.directions[keep]),
    )
