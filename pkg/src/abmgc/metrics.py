"""Edge-recovery metrics on off-diagonal entries of (signed) adjacency matrices."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import CausalGraph, DomainError


class UndefinedMetricError(ValueError):
    pass


def _rankdata(x: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties share the mean rank."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    n = len(x)
    while i < n:
        j = i
        while j + 1 < n and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i: j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties count half)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both classes")
    r = _rankdata(s)
    return float((r[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Average precision: sum over distinct thresholds of recall gain times precision."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AUPRC needs at least one positive")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    tp = np.cumsum(y_sorted)
    # evaluate only at the last index of each tie group
    last = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s) - 1]
    tp_at = tp[last].astype(float)
    k_at = last + 1.0
    precision = tp_at / k_at
    recall = tp_at / n_pos
    gain = np.diff(np.r_[0.0, recall])
    return float(np.sum(gain * precision))


def _rates(truth: np.ndarray, pred: np.ndarray) -> tuple[float, float]:
    """(sensitivity, specificity); NaN where a class is absent."""
    pos = truth
    neg = ~truth
    tpr = (pred & pos).sum() / pos.sum() if pos.any() else np.nan
    tnr = (~pred & neg).sum() / neg.sum() if neg.any() else np.nan
    return float(tpr), float(tnr)


def balanced_accuracy(truth, pred) -> float:
    """Mean of sensitivity and specificity; with one class absent, the rate that exists."""
    tpr, tnr = _rates(np.asarray(truth, bool), np.asarray(pred, bool))
    return float(np.nanmean([tpr, tnr]))


@dataclass
class MetricReport:
    auroc: float | None = None
    auprc: float | None = None
    acc: float | None = None
    ba: float | None = None
    ba_pos: float | None = None
    ba_neg: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def accuracy_metrics(pred: CausalGraph, truth: CausalGraph) -> dict[str, float]:
    """Presence accuracy and balanced accuracy, plus one-vs-rest BA for +1 and -1 edges."""
    if pred.p != truth.p:
        raise DomainError("graphs differ in size")
    if truth.p < 2:
        raise DomainError("need at least two agents")
    t = truth.offdiag()
    q = pred.offdiag()
    return {
        "acc": float(np.mean((t != 0) == (q != 0))),
        "ba": balanced_accuracy(t != 0, q != 0),
        "ba_pos": balanced_accuracy(t == 1, q == 1),
        "ba_neg": balanced_accuracy(t == -1, q == -1),
    }


def evaluate(magnitude: np.ndarray, pred: CausalGraph, truth: CausalGraph,
             signed: bool = True) -> MetricReport:
    """Full report: ranking metrics on ``magnitude`` against edge presence."""
    off = ~np.eye(truth.p, dtype=bool)
    scores = np.abs(np.asarray(magnitude, float)[off])
    labels = truth.offdiag() != 0
    acc = accuracy_metrics(pred, truth)
    rep = MetricReport(acc=acc["acc"], ba=acc["ba"])
    if labels.any() and not labels.all():
        rep.auroc = auroc(scores, labels)
    if labels.any():
        rep.auprc = auprc(scores, labels)
    if signed:
        rep.ba_pos = acc["ba_pos"]
        rep.ba_neg = acc["ba_neg"]
    return rep
