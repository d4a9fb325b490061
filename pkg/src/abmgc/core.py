"""Shared domain types, seeded randomness and lag-window helpers.

State layout
------------
Positional series store ``[position dims, velocity dims]`` per agent, so a
planar trajectory has ``values.shape == (T, p, 4)`` with columns
``(x, y, vx, vy)``.  Phase series store ``(phi, dphi/dt)`` per oscillator,
``values.shape == (T, p, 2)``; unwrapped phases are kept as-is.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator

import numpy as np


class SeriesKind(str, Enum):
    POSITIONAL = "positional"
    PHASE = "phase"


class LengthError(ValueError):
    """Series too short for the requested lag order."""


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


@dataclass(frozen=True)
class TrajectorySeries:
    """Multi-agent time series ``values[t, agent, feature]`` sampled every ``dt`` seconds.

    ``static`` carries per-agent constants that are not part of the state,
    e.g. intrinsic oscillator frequencies.
    """

    values: np.ndarray
    dt: float
    kind: SeriesKind = SeriesKind.POSITIONAL
    static: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 3:
            raise ValueError(f"values must be [T][p][d], got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("series contains non-finite values")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        kind = SeriesKind(self.kind)
        if kind is SeriesKind.POSITIONAL and values.shape[2] % 2:
            raise ValueError("positional series need [position; velocity] columns")
        if kind is SeriesKind.PHASE and values.shape[2] != 2:
            raise ValueError("phase series need (phi, dphi/dt) columns")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", kind)
        if self.static is not None:
            static = np.array(self.static, dtype=float)
            static.setflags(write=False)
            object.__setattr__(self, "static", static)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        """Spatial dimension (positional) or 1 (phase)."""
        if self.kind is SeriesKind.PHASE:
            return 1
        return self.values.shape[2] // 2

    @property
    def positions(self) -> np.ndarray:
        return self.values[:, :, : self.dim]

    @property
    def velocities(self) -> np.ndarray:
        return self.values[:, :, self.dim:]

    @classmethod
    def from_positions(cls, positions: np.ndarray, dt: float) -> "TrajectorySeries":
        """Build a positional series, deriving velocity by forward difference.

        ``v_t = (p_{t+1} - p_t) / dt``; the last step repeats the previous velocity.
        """
        positions = np.asarray(positions, dtype=float)
        if positions.ndim != 3 or positions.shape[0] < 2:
            raise ValueError("need at least two frames of [T][p][d] positions")
        vel = np.empty_like(positions)
        vel[:-1] = np.diff(positions, axis=0) / dt
        vel[-1] = vel[-2]
        return cls(np.concatenate([positions, vel], axis=2), dt, SeriesKind.POSITIONAL)


@dataclass(frozen=True)
class CausalGraph:
    """Signed adjacency; ``edges[i, j]`` is the effect of agent i on agent j."""

    edges: np.ndarray

    def __post_init__(self):
        edges = np.array(self.edges)
        if edges.ndim != 2 or edges.shape[0] != edges.shape[1]:
            raise ValueError("edges must be square")
        if not np.all(np.isin(edges, (-1, 0, 1))):
            raise ValueError("edges must lie in {-1, 0, +1}")
        edges = edges.astype(int)
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def p(self) -> int:
        return self.edges.shape[0]

    def offdiag(self) -> np.ndarray:
        """Off-diagonal entries in row-major order."""
        return self.edges[~np.eye(self.p, dtype=bool)]


@dataclass
class Rng:
    """Seeded generator (numpy PCG64): identical seeds give identical streams everywhere."""

    seed: int
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def spawn(self, n: int) -> list["Rng"]:
        """Derive ``n`` independent child seeds from this stream."""
        return [Rng(int(s)) for s in self._gen.integers(0, 2**63 - 1, size=n)]


@dataclass(frozen=True)
class LagWindow:
    """Feature history of one agent, oldest lag first: ``history[0]`` is lag K."""

    history: np.ndarray

    @property
    def K(self) -> int:
        return self.history.shape[0]


Featurizer = Callable[[TrajectorySeries, int, int], np.ndarray]


def identity_featurizer(series: TrajectorySeries, t: int, i: int) -> np.ndarray:
    return series.values[t, i]


def make_lag_windows(
    series: TrajectorySeries, K: int, featurizer: Featurizer = identity_featurizer
) -> Iterator[tuple[list[LagWindow], np.ndarray]]:
    """Yield ``T - K`` pairs of (per-agent lag windows, target state).

    Window ``m`` covers steps ``m .. m+K-1`` and its target is step ``m+K``.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    if series.T < K + 2:
        raise LengthError(f"series of length {series.T} is shorter than K+2={K + 2}")
    feats = np.stack(
        [np.stack([featurizer(series, t, i) for i in range(series.p)]) for t in range(series.T)]
    )
    for m in range(series.T - K):
        windows = [LagWindow(feats[m: m + K, i]) for i in range(series.p)]
        yield windows, series.values[m + K]


def straight_line_prediction(series: TrajectorySeries, t: int) -> np.ndarray:
    """State at step ``t`` if every agent kept moving as at step ``t-1``.

    Velocity is held and position advanced by ``v_{t-1} * dt``.  Phase series
    are treated the same way (constant phase velocity).
    """
    if t < 2 or t >= series.T:
        raise DomainError(f"straight-line prediction needs 2 <= t < T, got t={t}")
    return _straight(series.values[t - 1], series.dim, series.dt)


def straight_line_residuals(series: TrajectorySeries, per_agent: bool = False) -> np.ndarray:
    """Squared residual ``||x_t - x~_t||^2`` for every step, summed over agents
    (shape ``[T]``) or kept per agent (shape ``[T, p]``).

    Entry 0 has no predecessor and is NaN.
    """
    pred = _straight(series.values[:-1], series.dim, series.dt)
    sq = ((series.values[1:] - pred) ** 2).sum(axis=2)
    out = np.full((series.T, series.p), np.nan)
    out[1:] = sq
    return out if per_agent else out.sum(axis=1)


def _straight(prev: np.ndarray, d: int, dt: float) -> np.ndarray:
    pos, vel = prev[..., :d], prev[..., d:]
    return np.concatenate([pos + vel * dt, vel], axis=-1)
