import numpy as np

from abmgc.inference import EffectTrace, interaction_durations
from abmgc.plotting import plot_durations, plot_summary, plot_trace

PNG = b"\x89PNG"


def test_figures_are_written(tmp_path):
    s = np.zeros((60, 3, 3))
    s[:, 0, 1] = np.sin(np.linspace(0, 6, 60))
    trace = EffectTrace(s)
    assert plot_trace(trace, tmp_path / "t.png", dt=0.1).read_bytes()[:4] == PNG
    dur = interaction_durations(trace, fps=10.0, bin_seconds=2.0)
    assert plot_durations(dur, tmp_path / "d.png").read_bytes()[:4] == PNG
    summary = {m: {"ba": {"mean": 0.6, "sd": 0.1}, "auprc": {"mean": None, "sd": None},
                   "auroc": {"mean": 0.7, "sd": 0.05}} for m in ("abm", "gvar")}
    assert plot_summary(summary, tmp_path / "s.png").read_bytes()[:4] == PNG
