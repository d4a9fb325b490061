"""Augmented behavioural model: theory-shaped features, navigation signs and
generalised coefficients.

For target agent ``i`` and lag ``k`` the motion network maps the feature
vector ``h^i_{t-k}`` to a ``d x d_h`` coefficient matrix.  Columns belonging
to another agent ``j`` are multiplied by the navigation sign ``s_j`` and the
prediction is ``x^i_t = sum_k Psi^i_{t,k} h^i_{t-k}``.

Feature layout per target agent (``d_h`` columns):

* positional (boids): ``[v^i, r^{ij}/|r^{ij}| for j != i]``
* phase (Kuramoto): ``[dphi_i/dt, omega_i, sin(phi_i - phi_j) for j != i]``
* ``gvar`` mode: ``[x^i, x^j for j != i]`` with raw states

Other agents always appear in increasing index order.  The model output is
the velocity (positional) or the phase derivative (phase).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import DomainError, LengthError, Rng, SeriesKind, TrajectorySeries
from .neural import HIDDEN, Mlp

A_V = 1e-2
A_D = 1e-6
A_D_LEARNED = 1e-2


class Mode(str, Enum):
    FULL = "full"
    NO_NAVIGATION = "no_navigation"
    GVAR = "gvar"


@dataclass(frozen=True)
class BlockLayout:
    """Column layout of a feature vector: a self block then one block per other agent."""

    p: int
    d_self: int
    d_r: int

    @property
    def d_h(self) -> int:
        return self.d_self + (self.p - 1) * self.d_r

    def others(self, i: int) -> list[int]:
        return [j for j in range(self.p) if j != i]

    def cols(self, i: int, j: int) -> slice:
        """Columns of target ``i``'s features that carry source agent ``j``."""
        if i == j:
            return slice(0, self.d_self)
        r = j if j < i else j - 1
        start = self.d_self + r * self.d_r
        return slice(start, start + self.d_r)

    def other_mask(self) -> np.ndarray:
        m = np.ones(self.d_h, dtype=bool)
        m[: self.d_self] = False
        return m

    def coef_mask(self, d: int, structure: str) -> np.ndarray:
        """``[d, d_h]`` mask of coefficients the model may use.

        ``"diagonal"`` keeps only entries pairing output dim u with input dim u
        inside every block whose width equals ``d``; other blocks stay full.
        """
        mask = np.ones((d, self.d_h))
        if structure == "full":
            return mask
        if structure != "diagonal":
            raise DomainError(f"unknown coefficient structure {structure!r}")
        eye = np.eye(d)
        if self.d_self == d:
            mask[:, : self.d_self] = eye
        if self.d_r == d:
            for r in range(self.p - 1):
                mask[:, self.d_self + r * d: self.d_self + (r + 1) * d] = eye
        return mask

    def block_index(self) -> np.ndarray:
        """Map each column to its other-agent slot (``-1`` for the self block)."""
        idx = np.full(self.d_h, -1)
        for r in range(self.p - 1):
            idx[self.d_self + r * self.d_r: self.d_self + (r + 1) * self.d_r] = r
        return idx


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: BlockLayout
    coincident: tuple[int, ...] = ()


@dataclass(frozen=True)
class NavFeature:
    """Approach speed of i toward each other agent and their distance (others in index order)."""

    approach: np.ndarray
    distance: np.ndarray


@dataclass(frozen=True)
class FeatureSet:
    """Features for every step of a series.

    ``motion[t, i]`` is agent i's feature vector, ``target[t, i]`` the value
    the model predicts, and ``approach``/``distance`` (``[T, p, p-1]``) feed
    the navigation function when present.
    """

    motion: np.ndarray
    target: np.ndarray
    layout: BlockLayout
    approach: np.ndarray | None = None
    distance: np.ndarray | None = None
    coincident: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.motion.shape[0]

    @property
    def out_dim(self) -> int:
        return self.target.shape[2]


def _positional_geometry(series: TrajectorySeries):
    d = series.dim
    pos, vel = series.positions, series.velocities
    p = series.p
    T = series.T
    offsets = pos[:, None, :, :] - pos[:, :, None, :]  # [T, i, j, d] = p_j - p_i
    dist = np.linalg.norm(offsets, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(dist[..., None] > 0, offsets / dist[..., None], 0.0)
    sel = ~np.eye(p, dtype=bool)
    unit_o = unit[:, sel].reshape(T, p, p - 1, d)
    dist_o = dist[:, sel].reshape(T, p, p - 1)
    approach = np.einsum("tid,tird->tir", vel, unit_o)
    return unit_o, dist_o, approach


def feature_set(series: TrajectorySeries, mode: Mode | str = Mode.FULL) -> FeatureSet:
    mode = Mode(mode)
    p, T = series.p, series.T
    if series.kind is SeriesKind.PHASE:
        phi, dphi = series.values[:, :, 0], series.values[:, :, 1]
        target = dphi[:, :, None]
        if mode is Mode.GVAR:
            layout = BlockLayout(p, 1, 1)
            motion = _gvar_rows(dphi[:, :, None])
            return FeatureSet(motion, target, layout)
        omega = series.static if series.static is not None else dphi.mean(axis=0)
        layout = BlockLayout(p, 2, 1)
        diff = np.sin(phi[:, :, None] - phi[:, None, :])
        sel = ~np.eye(p, dtype=bool)
        others = diff[:, sel].reshape(T, p, p - 1)
        motion = np.concatenate(
            [dphi[:, :, None], np.broadcast_to(omega, (T, p))[:, :, None], others], axis=2)
        return FeatureSet(motion, target, layout)

    d = series.dim
    target = series.velocities
    if mode is Mode.GVAR:
        layout = BlockLayout(p, 2 * d, 2 * d)
        return FeatureSet(_gvar_rows(series.values), target, layout)
    unit_o, dist_o, approach = _positional_geometry(series)
    layout = BlockLayout(p, d, d)
    motion = np.concatenate([series.velocities, unit_o.reshape(T, p, (p - 1) * d)], axis=2)
    return FeatureSet(motion, target, layout, approach=approach, distance=dist_o,
                      coincident=dist_o == 0)


def _gvar_rows(state: np.ndarray) -> np.ndarray:
    """Per target i: own state followed by the others' states in index order."""
    T, p, f = state.shape
    rows = np.empty((T, p, p * f))
    for i in range(p):
        order = [i] + [j for j in range(p) if j != i]
        rows[:, i] = state[:, order].reshape(T, p * f)
    return rows


def build_features(series: TrajectorySeries, t: int, i: int,
                   mode: Mode | str = Mode.FULL) -> tuple[FeatureVector, NavFeature]:
    """Feature vector and navigation inputs of agent ``i`` at step ``t``."""
    if not 0 <= t < series.T or not 0 <= i < series.p:
        raise DomainError(f"step {t} / agent {i} out of range")
    fs = feature_set(series, mode)
    if fs.approach is None:
        nav = NavFeature(np.zeros(0), np.zeros(0))
        return FeatureVector(fs.motion[t, i], fs.layout), nav
    coincident = tuple(int(r) for r in np.flatnonzero(fs.coincident[t, i]))
    return (FeatureVector(fs.motion[t, i], fs.layout, coincident),
            NavFeature(fs.approach[t, i], fs.distance[t, i]))


def gain_sigmoid(x, gain: float):
    """Logistic function with gain: ``1 / (1 + exp(-gain * x))``."""
    return 0.5 * (1.0 + np.tanh(0.5 * gain * np.asarray(x, dtype=float)))


def navigation_sign(nav: NavFeature, a_v: float = A_V, a_d: float = A_D,
                    d_ignore: float = 0.0) -> np.ndarray:
    """Signed navigation factor per other agent, in [-1, 1].

    ``visibility * (sigmoid_{a_v}(approach) - 1/2) * 2`` where
    ``visibility = sigmoid_{a_d}(1/distance - d_ignore)``.
    """
    return _nav(np.asarray(nav.approach, float), np.asarray(nav.distance, float),
                a_v, a_d, d_ignore)[0]


def _nav(approach, distance, a_v, a_d, d_ignore):
    if not (a_v > 0 and a_d > 0):
        raise DomainError("navigation gains must be positive")
    with np.errstate(divide="ignore"):
        inv = np.where(distance > 0, 1.0 / np.where(distance > 0, distance, 1.0), np.inf)
    vis = gain_sigmoid(inv - d_ignore, a_d)
    app = 2.0 * (gain_sigmoid(approach, a_v) - 0.5)
    return vis * app, vis, app


@dataclass(frozen=True)
class CoefficientTensor:
    """``psi[t, i, k, u, q]``: coefficient of target i's feature column q at lag k+1
    on output dim u, for window t (target step ``t + K``)."""

    psi: np.ndarray
    layout: BlockLayout

    @property
    def K(self) -> int:
        return self.psi.shape[2]

    def pair_block(self, source: int, target: int) -> np.ndarray:
        """``[t, k, d, d_r]`` slice of the target's coefficients on the source's block."""
        return self.psi[:, target, :, :, self.layout.cols(target, source)]

    def to_rows(self):
        """Long-format rows ``(t, i, k, u, j, q, value)``; j is the source agent, k is 1-based.

        The self block uses ``j = i``.
        """
        T, p, K, d, dh = self.psi.shape
        for t in range(T):
            for i in range(p):
                for j in range(p):
                    cols = self.layout.cols(i, j)
                    block = self.psi[t, i, :, :, cols]
                    for k in range(K):
                        for u in range(d):
                            for q in range(block.shape[2]):
                                yield t, i, k + 1, u, j, q, float(block[k, u, q])


@dataclass
class Batch:
    """Gathered lag inputs for a set of target steps.

    ``x[n, b]`` is the feature vector feeding bank slot ``n = i*K + (k-1)``
    for the b-th target step; ``y[i, b]`` is the matching target.
    """

    steps: np.ndarray
    x: np.ndarray
    y: np.ndarray
    approach: np.ndarray | None
    distance: np.ndarray | None


def make_batch(fs: FeatureSet, K: int, steps: np.ndarray | None = None) -> Batch:
    if fs.T < K + 2:
        raise LengthError(f"series of length {fs.T} is shorter than K+2={K + 2}")
    if steps is None:
        steps = np.arange(K, fs.T)
    p = fs.layout.p
    lags = np.arange(1, K + 1)
    src = steps[None, :] - lags[:, None]  # [K, B]
    x = fs.motion[src]  # [K, B, p, dh]
    x = np.transpose(x, (2, 0, 1, 3)).reshape(p * K, len(steps), -1)
    y = np.transpose(fs.target[steps], (1, 0, 2))
    nav_a = nav_d = None
    if fs.approach is not None:
        nav_a = np.transpose(fs.approach[src], (2, 0, 1, 3)).reshape(p * K, len(steps), p - 1)
        nav_d = np.transpose(fs.distance[src], (2, 0, 1, 3)).reshape(p * K, len(steps), p - 1)
    return Batch(steps, x, y, nav_a, nav_d)


@dataclass
class Forward:
    psi: np.ndarray  # [n, B, d, dh]
    raw: np.ndarray  # motion-network output, same shape
    col_sign: np.ndarray  # [n, B, dh]
    pred: np.ndarray  # [p, B, d]
    mlp_cache: tuple
    nav: tuple | None


@dataclass
class AbmModel:
    """Motion networks for every (target agent, lag) plus navigation gains."""

    p: int
    K: int
    out_dim: int
    layout: BlockLayout
    motion: Mlp
    mode: Mode = Mode.FULL
    a_v: float = A_V
    a_d: float = A_D
    d_ignore: np.ndarray = field(default_factory=lambda: np.zeros(1))
    learn_d_ignore: bool = False
    structure: str = "full"

    @classmethod
    def create(cls, fs: FeatureSet, K: int, rng: Rng, mode: Mode | str = Mode.FULL,
               hidden: int = HIDDEN, out_scale: float = 1.0, a_v: float = A_V,
               a_d: float | None = None, learn_d_ignore: bool = False,
               structure: str = "full") -> "AbmModel":
        mode = Mode(mode)
        layout = fs.layout
        d = fs.out_dim
        mlp = Mlp.init(layout.d_h, d * layout.d_h, rng, hidden=hidden, n=layout.p * K,
                       out_scale=out_scale)
        if a_d is None:
            a_d = A_D_LEARNED if learn_d_ignore else A_D
        layout.coef_mask(d, structure)  # validates the name
        return cls(layout.p, K, d, layout, mlp, mode, a_v, a_d,
                   np.zeros(1), learn_d_ignore, structure)

    @property
    def mask(self) -> np.ndarray:
        return self.layout.coef_mask(self.out_dim, self.structure)

    @property
    def uses_navigation(self) -> bool:
        return self.mode is Mode.FULL and self.p > 1

    def params(self) -> dict[str, np.ndarray]:
        params = self.motion.params()
        if self.learn_d_ignore and self.uses_navigation:
            params["d_ignore"] = self.d_ignore
        return params

    def column_signs(self, batch: Batch):
        n, B, dh = batch.x.shape
        col = np.ones((n, B, dh))
        if not self.uses_navigation or batch.approach is None:
            return col, None
        s, vis, app = _nav(batch.approach, batch.distance, self.a_v, self.a_d,
                           float(self.d_ignore[0]))
        idx = self.layout.block_index()
        other = idx >= 0
        col[:, :, other] = s[:, :, idx[other]]
        return col, (s, vis, app)

    def forward(self, batch: Batch) -> Forward:
        n, B, dh = batch.x.shape
        out, cache = self.motion.forward(batch.x)
        raw = out.reshape(n, B, self.out_dim, dh)
        if self.structure != "full":
            raw = raw * self.mask
        col, nav = self.column_signs(batch)
        psi = raw * col[:, :, None, :]
        contrib = (psi @ batch.x[..., None])[..., 0]
        pred = contrib.reshape(self.p, self.K, B, self.out_dim).sum(axis=1)
        return Forward(psi, raw, col, pred, cache, nav)

    def backward(self, batch: Batch, fwd: Forward, d_pred: np.ndarray | None,
                 d_psi: np.ndarray | None) -> dict[str, np.ndarray]:
        """Parameter gradients given upstream gradients on predictions and coefficients."""
        n, B, d, dh = fwd.psi.shape
        g_psi = np.zeros_like(fwd.psi) if d_psi is None else d_psi.copy()
        if d_pred is not None:
            g_slot = np.repeat(d_pred[:, None], self.K, axis=1).reshape(n, B, d)
            g_psi += g_slot[:, :, :, None] * batch.x[:, :, None, :]
        g_raw = g_psi * fwd.col_sign[:, :, None, :]
        if self.structure != "full":
            g_raw = g_raw * self.mask
        grads, _ = self.motion.backward(fwd.mlp_cache, g_raw.reshape(n, B, d * dh))
        if "d_ignore" in self.params():
            s, vis, app = fwd.nav
            g_col = (g_psi * fwd.raw).sum(axis=2)  # [n, B, dh]
            idx = self.layout.block_index()
            g_s = np.zeros_like(s)
            for r in range(self.p - 1):
                g_s[:, :, r] = g_col[:, :, idx == r].sum(axis=2)
            ds_dd = -app * vis * (1.0 - vis) * self.a_d
            grads["d_ignore"] = np.array([np.sum(g_s * ds_dd)])
        return grads

    def to_tensor(self, fwd: Forward) -> CoefficientTensor:
        n, B, d, dh = fwd.psi.shape
        psi = fwd.psi.reshape(self.p, self.K, B, d, dh).transpose(2, 0, 1, 3, 4)
        return CoefficientTensor(np.ascontiguousarray(psi), self.layout)


def coefficients(model: AbmModel, features: FeatureVector, nav: NavFeature,
                 i: int, k: int) -> np.ndarray:
    """``d x d_h`` coefficient matrix of target ``i`` at lag ``k`` (1-based) for one input."""
    n = i * model.K + (k - 1)
    x = np.zeros((model.motion.n, 1, model.layout.d_h))
    x[n, 0] = features.values
    raw = model.motion(x)[n, 0].reshape(model.out_dim, model.layout.d_h) * model.mask
    col = np.ones(model.layout.d_h)
    if model.uses_navigation and len(nav.approach):
        s = navigation_sign(nav, model.a_v, model.a_d, float(model.d_ignore[0]))
        idx = model.layout.block_index()
        col[idx >= 0] = s[idx[idx >= 0]]
    return raw * col[None, :]


def predict(model: AbmModel, series: TrajectorySeries, t: int) -> tuple[np.ndarray, np.ndarray]:
    """One-step forecast of all agents at step ``t`` and its ``[p, K, d, d_h]`` coefficients."""
    if t < model.K or t >= series.T:
        raise DomainError(f"need K <= t < T, got t={t}")
    fs = feature_set(series, model.mode)
    batch = _single_step_batch(fs, model.K, t)
    fwd = model.forward(batch)
    psi = fwd.psi.reshape(model.p, model.K, model.out_dim, model.layout.d_h)
    return fwd.pred[:, 0], psi


def _single_step_batch(fs: FeatureSet, K: int, t: int) -> Batch:
    p = fs.layout.p
    src = t - np.arange(1, K + 1)
    x = np.transpose(fs.motion[src], (1, 0, 2)).reshape(p * K, 1, -1)
    y = fs.target[t][:, None, :]
    a = dist = None
    if fs.approach is not None:
        a = np.transpose(fs.approach[src], (1, 0, 2)).reshape(p * K, 1, p - 1)
        dist = np.transpose(fs.distance[src], (1, 0, 2)).reshape(p * K, 1, p - 1)
    return Batch(np.array([t]), x, y, a, dist)
