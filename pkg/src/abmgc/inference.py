"""Signed Granger-causal strengths from generalised coefficients.

For a source ``i`` and target ``j`` the block ``Psi_{i,j}[t, k]`` is the
``d x d_r`` part of target j's coefficients on i's features.  Its strength
is ``max_{t,k} |Psi_{i,j}[t,k]|_F`` and its sign comes from the median
entry of each block, reduced by signmax over lags and then over time.
Matrices follow the ground-truth convention: ``[i, j]`` is the effect of
i on j.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .abm import CoefficientTensor
from .core import CausalGraph, DomainError


@dataclass(frozen=True)
class GCMatrix:
    strengths: np.ndarray
    magnitude: np.ndarray
    sign: np.ndarray

    @property
    def p(self) -> int:
        return self.magnitude.shape[0]

    @classmethod
    def from_parts(cls, magnitude: np.ndarray, sign: np.ndarray) -> "GCMatrix":
        magnitude = np.array(magnitude, dtype=float)
        sign = np.array(sign, dtype=int)
        np.fill_diagonal(magnitude, 0.0)
        np.fill_diagonal(sign, 0)
        return cls(sign * magnitude, magnitude, sign)


@dataclass(frozen=True)
class EffectTrace:
    """``s[t, i, j]``: signed strength of i's effect on j at window t."""

    s: np.ndarray

    def normalized(self) -> np.ndarray:
        """Trace divided by its maximum absolute value (for plotting)."""
        m = np.abs(self.s).max()
        return self.s / m if m > 0 else self.s.copy()


def signed_extreme(values, axis=None):
    """The max or the min, whichever is larger in absolute value (ties go to the max)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("signmax of an empty collection")
    hi = v.max(axis=axis)
    lo = v.min(axis=axis)
    return np.where(np.abs(hi) >= np.abs(lo), hi, lo)


def signmax(values) -> int:
    """Sign of the extreme value with the larger magnitude: ``signmax([1, 2, -3]) == -1``.

    Returns 0 only when every value is 0; equal ``|max|`` and ``|min|`` give +1.
    """
    return int(np.sign(signed_extreme(values)))


def lower_median(x: np.ndarray, axis: int) -> np.ndarray:
    """Median that returns an attained element (lower middle for even counts)."""
    s = np.sort(x, axis=axis)
    n = x.shape[axis]
    return np.take(s, (n - 1) // 2, axis=axis)


def _pair_stats(psi: CoefficientTensor, source: int, target: int):
    block = psi.pair_block(source, target)  # [t, k, d, d_r]
    T, K = block.shape[:2]
    flat = block.reshape(T, K, -1)
    med = lower_median(flat, axis=2)  # [t, k]
    norm = np.sqrt((flat ** 2).sum(axis=2))  # [t, k]
    return med, norm


def aggregate(psi: CoefficientTensor) -> GCMatrix:
    """Reduce a coefficient tensor to signed pairwise strengths."""
    if not np.all(np.isfinite(psi.psi)):
        raise ValueError("coefficient tensor contains non-finite values")
    p = psi.layout.p
    mag = np.zeros((p, p))
    sign = np.zeros((p, p), dtype=int)
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            med, norm = _pair_stats(psi, i, j)
            # signmax over lags keeps the extreme value so the outer signmax sees magnitudes
            per_t = signed_extreme(med, axis=1)
            sign[i, j] = signmax(per_t)
            mag[i, j] = norm.max()
    return GCMatrix.from_parts(mag, sign)


def effect_trace(psi: CoefficientTensor) -> EffectTrace:
    """Per-window signed strengths (lag reduction only)."""
    p = psi.layout.p
    T = psi.psi.shape[0]
    s = np.zeros((T, p, p))
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            med, norm = _pair_stats(psi, i, j)
            s[:, i, j] = np.sign(signed_extreme(med, axis=1)) * norm.max(axis=1)
    return EffectTrace(s)


def threshold(magnitude: np.ndarray) -> float:
    """Half the largest off-diagonal magnitude."""
    m = np.asarray(magnitude, dtype=float)
    p = m.shape[-1]
    off = m[..., ~np.eye(p, dtype=bool)]
    return float(off.max()) / 2.0 if off.size else 0.0


def binarize(gc: GCMatrix) -> CausalGraph:
    """Keep pairs whose magnitude reaches half the largest off-diagonal magnitude."""
    if gc.p < 2:
        raise DomainError("need at least two agents")
    tau = threshold(gc.magnitude)
    edges = np.zeros((gc.p, gc.p), dtype=int)
    if tau > 0:
        present = gc.magnitude >= tau
        np.fill_diagonal(present, False)
        # a present edge whose medians were all zero still counts as present
        edges[present] = np.where(gc.sign[present] == 0, 1, gc.sign[present])
    return CausalGraph(edges)


def binarize_trace(trace: EffectTrace) -> np.ndarray:
    """Per-frame signed edges using the same half-maximum rule over the whole sequence."""
    s = trace.s
    p = s.shape[1]
    off = ~np.eye(p, dtype=bool)
    tau = float(np.abs(s[:, off]).max()) / 2.0 if s.size else 0.0
    out = np.zeros(s.shape, dtype=int)
    if tau > 0:
        out[(s >= tau)] = 1
        out[(s <= -tau)] = -1
        out[:, ~off] = 0
    return out


@dataclass(frozen=True)
class Durations:
    """Per-bin attraction and repulsion time (s) for each ordered pair."""

    bin_seconds: float
    attraction: np.ndarray  # [bins, p, p]
    repulsion: np.ndarray

    def totals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.attraction.sum(axis=(1, 2)), self.repulsion.sum(axis=(1, 2))


def interaction_durations(trace: EffectTrace, fps: float, bin_seconds: float = 10.0) -> Durations:
    if not (fps > 0 and bin_seconds > 0):
        raise DomainError("fps and bin length must be positive")
    signs = binarize_trace(trace)
    per_bin = max(int(round(bin_seconds * fps)), 1)
    T = signs.shape[0]
    n_bins = max(int(np.ceil(T / per_bin)), 1)
    p = signs.shape[1]
    att = np.zeros((n_bins, p, p))
    rep = np.zeros((n_bins, p, p))
    for b in range(n_bins):
        chunk = signs[b * per_bin: (b + 1) * per_bin]
        att[b] = (chunk > 0).sum(axis=0) / fps
        rep[b] = (chunk < 0).sum(axis=0) / fps
    return Durations(bin_seconds, att, rep)
