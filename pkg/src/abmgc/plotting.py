"""Static figures written next to the CSV/JSON outputs (Agg backend, no display)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .inference import Durations, EffectTrace  # noqa: E402


def plot_trace(trace: EffectTrace, path, dt: float = 1.0, pairs=None) -> Path:
    """Normalised signed effect of each ordered pair over time."""
    s = trace.normalized()
    T, p, _ = s.shape
    pairs = pairs or [(i, j) for i in range(p) for j in range(p) if i != j]
    t = np.arange(T) * dt
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for i, j in pairs:
        ax.plot(t, s[:, i, j], lw=1, label=f"{i}→{j}")
    ax.axhline(0, color="0.5", lw=0.5)
    ax.set_xlabel("time [s]" if dt != 1.0 else "window")
    ax.set_ylabel("normalised effect")
    ax.set_ylim(-1.05, 1.05)
    if len(pairs) <= 12:
        ax.legend(fontsize=6, ncol=4, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_durations(durations: Durations, path) -> Path:
    """Total attraction and repulsion time per bin, summed over pairs."""
    att, rep = durations.totals()
    x = np.arange(len(att)) * durations.bin_seconds
    w = durations.bin_seconds * 0.4
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(x - w / 2, att, width=w, label="attraction", color="tab:red")
    ax.bar(x + w / 2, rep, width=w, label="repulsion", color="tab:blue")
    ax.set_xlabel("bin start [s]")
    ax.set_ylabel("duration [s]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_summary(summaries: dict[str, dict], path, metrics=("ba", "auprc", "auroc")) -> Path:
    """Bar chart of mean +- SD per method for the chosen metrics."""
    methods = list(summaries)
    fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(methods), 3.5))
    width = 0.8 / len(metrics)
    for n, m in enumerate(metrics):
        means = [summaries[k][m]["mean"] or 0.0 for k in methods]
        sds = [summaries[k][m]["sd"] or 0.0 for k in methods]
        ax.bar(np.arange(len(methods)) + (n - (len(metrics) - 1) / 2) * width, means, width,
               yerr=sds, capsize=2, label=m)
    ax.set_xticks(np.arange(len(methods)))
    ax.set_xticklabels(methods, rotation=20, fontsize=8)
    ax.set_ylim(0, 1)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
