import csv
import json

import pytest

from abmgc import io
from abmgc.cli import load_config, main

from conftest import straight_movers


@pytest.fixture
def fast_cfg(tmp_path):
    path = tmp_path / "fast.yaml"
    path.write_text("train:\n  epochs: 3\n  hidden: 4\nT: 30\n")
    return path


def test_simulate_boid_trials(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--system", "boid", "--trials", "10", "--out", str(out)]) == 0
    csvs = sorted(out.glob("trial_*.csv"))
    assert len(csvs) == 10
    with csvs[0].open() as fh:
        assert sum(1 for _ in csv.reader(fh)) == 1 + 1000
    manifest = io.read_json(out / "manifest.json")
    assert manifest["seeds"] == list(range(10)) and manifest["T"] == 200 and manifest["p"] == 5
    assert io.validate_file(out / "trial_000_truth.json") == "truth"


def test_simulate_kuramoto_defaults(tmp_path):
    out = tmp_path / "k"
    assert main(["simulate", "--system", "kuramoto", "--trials", "1", "--out", str(out)]) == 0
    series = io.read_series(out / "trial_000.csv", 100.0)
    assert series.values.shape == (200, 5, 2)
    _, omega = io.read_truth(out / "trial_000_truth.json")
    assert omega.shape == (5,)


def test_zero_trials_is_a_validation_error(tmp_path, capsys):
    assert main(["simulate", "--trials", "0", "--out", str(tmp_path)]) == 1
    assert main(["experiment", "--system", "boid", "--trials", "0", "--out", str(tmp_path)]) == 1


def test_unwritable_output_is_a_runtime_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--trials", "1", "--out", str(blocker / "sub")]) == 2


def test_bad_arguments_exit_one(tmp_path):
    assert main(["experiment", "--method", "nope"]) == 1
    assert main(["experiment", "--out", str(tmp_path)]) == 1
    assert main(["experiment", "--system", "boid", "--jobs", "0"]) == 1
    assert main(["experiment", "--system", "boid", "--method", "gvar", "--no-tg",
                 "--out", str(tmp_path)]) == 1


def test_train_infer_eval_chain(tmp_path, fast_cfg, capsys):
    sim = tmp_path / "sim"
    main(["simulate", "--system", "boid", "--trials", "1", "--T", "30", "--out", str(sim)])
    trained = tmp_path / "trained"
    assert main(["train", str(sim / "trial_000.csv"), "--fps", "100", "--config", str(fast_cfg),
                 "--out", str(trained)]) == 0
    assert json.loads((trained / "config.json").read_text())["K"] == 3
    inferred = tmp_path / "inf"
    assert main(["infer", str(trained / "coefficients.csv"), "--out", str(inferred)]) == 0
    capsys.readouterr()
    metrics_path = tmp_path / "m.json"
    assert main(["eval", str(inferred / "gc.json"), str(sim / "trial_000_truth.json"),
                 "--out", str(metrics_path)]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed == io.read_json(metrics_path)
    assert set(printed) == {"auroc", "auprc", "acc", "ba", "ba_pos", "ba_neg"}
    paths = [str(p) for p in (trained / "coefficients.csv", trained / "history.csv",
                              inferred / "gc.json", inferred / "trace.csv", metrics_path)]
    assert main(["validate", *paths]) == 0


def test_eval_unsigned_drops_signed_scores(tmp_path, capsys):
    gc = tmp_path / "gc.json"
    truth = tmp_path / "t.json"
    gc.write_text(json.dumps({"p": 2, "strengths": [[0, 1], [0.2, 0]], "signs": [[0, 1], [1, 0]],
                              "binary": [[0, 1], [0, 0]]}))
    truth.write_text(json.dumps({"p": 2, "edges": [[0, 1], [0, 0]]}))
    assert main(["eval", str(gc), str(truth), "--unsigned"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["ba_pos"] is None and out["acc"] == 1.0


def test_eval_size_mismatch(tmp_path):
    gc = tmp_path / "gc.json"
    truth = tmp_path / "t.json"
    gc.write_text(json.dumps({"p": 2, "strengths": [[0, 1], [0.2, 0]], "signs": [[0, 1], [1, 0]],
                              "binary": [[0, 1], [0, 0]]}))
    truth.write_text(json.dumps({"p": 3, "edges": [[0, 1, 0], [0, 0, 0], [0, 0, 0]]}))
    assert main(["eval", str(gc), str(truth)]) == 1


def test_experiment_outputs_and_summary(tmp_path, fast_cfg):
    out = tmp_path / "exp"
    assert main(["experiment", "--system", "kuramoto", "--trials", "2", "--config", str(fast_cfg),
                 "--out", str(out), "--figures"]) == 0
    for name in ("manifest.json", "results.json", "metrics.json", "summary.csv", "summary.png"):
        assert (out / name).exists()
    metrics = io.read_json(out / "metrics.json")
    assert set(metrics) >= {"acc", "ba", "auroc", "auprc"}
    assert main(["validate", str(out / "manifest.json"), str(out / "results.json"),
                 str(out / "metrics.json"), str(out / "summary.csv")]) == 0


def test_ablation_flags_select_methods(tmp_path, fast_cfg):
    out = tmp_path / "abl"
    assert main(["experiment", "--system", "boid", "--trials", "1", "--no-navigation", "--no-tg",
                 "--config", str(fast_cfg), "--out", str(out)]) == 0
    assert io.read_json(out / "results.json")["method"] == "abm_no_nav_no_tg"


def test_failed_trials_exit_two(tmp_path):
    cfg = tmp_path / "short.yaml"
    cfg.write_text("T: 4\n")
    out = tmp_path / "fail"
    assert main(["experiment", "--system", "boid", "--trials", "1", "--config", str(cfg),
                 "--out", str(out)]) == 2
    assert io.read_json(out / "results.json")["failures"] == 1


def test_manifest_reruns_are_byte_identical(tmp_path, fast_cfg):
    first, second = tmp_path / "a", tmp_path / "b"
    main(["experiment", "--system", "boid", "--trials", "2", "--seed", "7", "--config",
          str(fast_cfg), "--out", str(first)])
    assert main(["experiment", "--manifest", str(first / "manifest.json"), "--out", str(second)]) == 0
    assert (first / "metrics.json").read_bytes() == (second / "metrics.json").read_bytes()


def test_grid_writes_chosen_config(tmp_path):
    cfg = tmp_path / "g.yaml"
    cfg.write_text("grid:\n  lam: [0.0, 0.5]\ntrain:\n  epochs: 2\n  hidden: 3\nT: 25\n")
    out = tmp_path / "grid"
    assert main(["grid", "--system", "boid", "--trials", "1", "--config", str(cfg),
                 "--out", str(out)]) == 0
    chosen = load_config(out / "chosen.yaml")
    assert chosen["train"]["lam"] in (0.0, 0.5) and chosen["train"]["epochs"] == 2
    assert io.read_json(out / "grid.json")["seed"] == 100_000


def test_analyze_parallel_movers_have_no_interactions(tmp_path):
    path = tmp_path / "par.csv"
    io.write_trajectory_csv(path, straight_movers(p=3, T=300, dt=1 / 30))
    cfg = tmp_path / "c.yaml"
    cfg.write_text("epochs: 20\nhidden: 8\n")
    out = tmp_path / "an"
    assert main(["analyze", str(path), "--fps", "30", "--config", str(cfg), "--out", str(out),
                 "--figures"]) == 0
    with (out / "durations.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    # 300 frames at 30 fps in 10 s bins: one bin, six ordered pairs, two signs
    assert len(rows) == 12
    assert all(float(r["seconds"]) == 0.0 for r in rows)
    assert (out / "trace.png").exists() and (out / "durations.png").exists()


def test_analyze_missing_agent_column(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("frame,x,y\n0,0,0\n1,1,1\n")
    assert main(["analyze", str(path), "--fps", "30", "--out", str(tmp_path / "o")]) == 1
    assert "bad.csv:1" in capsys.readouterr().err


def test_analyze_malformed_row_names_line(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("frame,agent,x,y\n0,0,0,0\n0,1,0,0\n1,0,x,0\n1,1,0,0\n")
    assert main(["analyze", str(path), "--fps", "30", "--out", str(tmp_path / "o")]) == 1
    assert "bad.csv:4" in capsys.readouterr().err


def test_analyze_needs_fps(tmp_path):
    path = tmp_path / "p.csv"
    io.write_trajectory_csv(path, straight_movers(T=10))
    assert main(["analyze", str(path), "--out", str(tmp_path / "o")]) == 1


def test_validate_reports_bad_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"hello": 1}')
    assert main(["validate", str(bad)]) == 1


def test_flat_config_is_read_as_training_settings(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"lam": 0.5, "K": 2}')
    assert load_config(cfg) == {"train": {"lam": 0.5, "K": 2}}
    broken = tmp_path / "b.yaml"
    broken.write_text("a: [1, 2\n")
    with pytest.raises(io.ParseError):
        load_config(broken)
