"""Linear Granger causality and local transfer entropy baselines.

Both work on the modelled channels of each agent (velocity for trajectories,
phase derivative for oscillators) and reduce multi-dimensional blocks with
norms so they are comparable with the neural model.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .core import DomainError, SeriesKind, TrajectorySeries
from .inference import GCMatrix, lower_median, signmax

log = logging.getLogger(__name__)

RIDGE = 1e-8
TE_BINS = 8


def channels(series: TrajectorySeries) -> np.ndarray:
    """``[T, p, d]`` channels the baselines model."""
    if series.kind is SeriesKind.PHASE:
        return series.values[:, :, 1:2]
    return series.velocities


@dataclass(frozen=True)
class VarModel:
    """``coef[k, a, b]`` maps channel b at lag k+1 onto channel a; channels are agent-major."""

    K: int
    coef: np.ndarray
    intercept: np.ndarray
    resid_var: np.ndarray


def fit_var(x: np.ndarray, K: int, intercept: bool = True) -> tuple[VarModel, np.ndarray, np.ndarray]:
    """Least-squares VAR(K) on ``x[T, n]``; also returns design matrix and residuals."""
    x = np.asarray(x, dtype=float)
    T, n = x.shape
    if T - K <= K * n + intercept:
        raise DomainError(f"T={T} too short to identify a VAR({K}) on {n} channels")
    lags = [x[K - k: T - k] for k in range(1, K + 1)]
    Z = np.concatenate(lags, axis=1)
    if intercept:
        Z = np.concatenate([Z, np.ones((T - K, 1))], axis=1)
    Y = x[K:]
    gram = Z.T @ Z
    rank = np.linalg.matrix_rank(Z)
    if rank < Z.shape[1]:
        warnings.warn(f"rank-deficient VAR design ({rank}/{Z.shape[1]}); using ridge {RIDGE}",
                      RuntimeWarning, stacklevel=2)
        beta = np.linalg.solve(gram + RIDGE * np.eye(Z.shape[1]), Z.T @ Y)
    else:
        beta = np.linalg.lstsq(Z, Y, rcond=None)[0]
    resid = Y - Z @ beta
    coef = beta[: K * n].T.reshape(n, K, n).transpose(1, 0, 2)
    icpt = beta[K * n] if intercept else np.zeros(n)
    model = VarModel(K, coef, icpt, resid.var(axis=0))
    return model, Z, resid


def fit_linear_gc(series: TrajectorySeries, K: int) -> tuple[VarModel, GCMatrix]:
    """VAR fit on the agents' channels; strength of i->j is the Frobenius norm of the
    cross blocks over all lags, sign from signmax of the per-lag block medians."""
    ch = channels(series)
    T, p, d = ch.shape
    model, _, _ = fit_var(ch.reshape(T, p * d), K)
    mag = np.zeros((p, p))
    sign = np.zeros((p, p), dtype=int)
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            block = model.coef[:, j * d:(j + 1) * d, i * d:(i + 1) * d]  # [K, d_target, d_source]
            mag[i, j] = np.sqrt((block ** 2).sum())
            med = lower_median(block.reshape(K, -1), axis=1)
            sign[i, j] = signmax(med)
    return model, GCMatrix.from_parts(mag, sign)


def discretize(x: np.ndarray, bins: int = TE_BINS) -> np.ndarray:
    """Uniform-width binning of one channel into integer symbols ``0..bins-1``."""
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi <= lo:
        return np.zeros(len(x), dtype=int)
    edges = np.linspace(lo, hi, bins + 1)[1:-1]
    return np.searchsorted(edges, x, side="right")


def local_te_symbols(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Local transfer entropy source -> target (nats) for discrete symbol sequences.

    ``te[t] = log p(y_{t+1} | y_t, x_t) / p(y_{t+1} | y_t)`` with plug-in
    probabilities, for t = 0 .. T-2.
    """
    x = np.asarray(source)
    y = np.asarray(target)
    if len(x) != len(y) or len(x) < 2:
        raise DomainError("source and target must share a length >= 2")
    _, xs = np.unique(x, return_inverse=True)
    _, ys = np.unique(y, return_inverse=True)
    y1, y0, x0 = ys[1:], ys[:-1], xs[:-1]
    nx, ny = xs.max() + 1, ys.max() + 1
    joint = np.zeros((ny, ny, nx))
    np.add.at(joint, (y1, y0, x0), 1)
    c_y0x0 = joint.sum(axis=0)
    c_y1y0 = joint.sum(axis=2)
    c_y0 = c_y1y0.sum(axis=0)
    num = joint[y1, y0, x0] / c_y0x0[y0, x0]
    den = c_y1y0[y1, y0] / c_y0[y0]
    if np.any(den == 0) or np.any(num == 0):
        # plug-in counts from the same sample cannot produce empty cells; guard anyway
        warnings.warn("empty conditional cell; backing off to the marginal", RuntimeWarning)
        num = np.where(num == 0, den, num)
    return np.log(num / den)


@dataclass(frozen=True)
class TeEstimate:
    """``local[t, i, j]``: local TE from i to j (norm over channel pairs)."""

    local: np.ndarray
    bins: int


def local_te(series: TrajectorySeries, bins: int = TE_BINS) -> tuple[TeEstimate, GCMatrix]:
    """Pairwise local TE on binned channels; strength is the max over time of |local TE|.

    Multi-dimensional agents combine the per-channel-pair values with an L2 norm.
    """
    if bins < 2:
        raise DomainError("need at least two bins")
    ch = channels(series)
    T, p, d = ch.shape
    sym = np.stack([[discretize(ch[:, a, u], bins) for u in range(d)] for a in range(p)])
    local = np.zeros((T - 1, p, p))
    mag = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            per = np.stack([local_te_symbols(sym[i, q], sym[j, u])
                            for u in range(d) for q in range(d)])
            local[:, i, j] = np.sqrt((per ** 2).sum(axis=0))
            mag[i, j] = np.sqrt((np.abs(per).max(axis=1) ** 2).sum())
    return TeEstimate(local, bins), GCMatrix.from_parts(mag, np.ones((p, p), dtype=int))
