"""Command-line entry point: ``abmgc <command> [options]``.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import jsonschema
import yaml

from . import io
from .abm import Mode
from .core import LengthError
from .experiment import (DEFAULT_TRAIN, METHODS, SYSTEMS, VALIDATION_OFFSET, ExperimentSpec,
                         default_grid, grid_search, run_experiment, simulate_trial)
from .inference import aggregate, binarize, effect_trace, interaction_durations
from .metrics import evaluate
from .training import TrainConfig, train

log = logging.getLogger("abmgc")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def load_config(path) -> dict:
    """YAML or JSON document; a flat mapping is read as training settings."""
    if path is None:
        return {}
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise io.ParseError(path, mark.line + 1 if mark else None, str(e)) from None
    except OSError as e:
        raise UsageError(f"cannot read config: {e}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise io.ParseError(path, None, "config must be a mapping")
    if "train" not in doc and set(doc) <= set(TrainConfig.__dataclass_fields__):
        doc = {"train": doc}
    return doc


def _method(args) -> str:
    method = args.method or "abm"
    if args.no_navigation or args.no_tg:
        if method != "abm":
            raise UsageError("--no-navigation/--no-tg apply to --method abm only")
        method = {(True, False): "abm_no_nav", (False, True): "abm_no_tg",
                  (True, True): "abm_no_nav_no_tg"}[(args.no_navigation, args.no_tg)]
    return method


def _out(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out}: {e}") from e
    return out


def _train_config(args, cfg: dict, system: str | None) -> TrainConfig:
    d = {**DEFAULT_TRAIN.get(system or "", {}), **cfg.get("train", {}), "seed": args.seed}
    if args.no_navigation:
        d["mode"] = Mode.NO_NAVIGATION.value
    if args.no_tg:
        d["use_tg"] = False
    return TrainConfig.from_dict(d)


# -- commands -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    out = _out(args)
    p, T = cfg.get("p", args.p), cfg.get("T", args.T)
    seeds = [args.seed + n for n in range(args.trials)]
    for n, seed in enumerate(seeds):
        series, truth = simulate_trial(args.system, seed, p, T)
        stem = out / f"trial_{n:03d}"
        if args.system == "boid":
            io.write_trajectory_csv(stem.with_suffix(".csv"), series)
            io.write_json(f"{stem}_truth.json", io.truth_document(truth))
        else:
            io.write_phase_csv(stem.with_suffix(".csv"), series)
            io.write_json(f"{stem}_truth.json", io.truth_document(truth, series.static))
    manifest = {"system": args.system, "trials": args.trials, "seeds": seeds, "p": p, "T": T,
                "fps": 1.0 / series.dt, "train": cfg.get("train", {})}
    io.write_json(out / "manifest.json", manifest)
    print(f"wrote {args.trials} trials to {out}")
    return EXIT_OK


def _read_input(args, cfg):
    fps = args.fps or cfg.get("fps")
    if not fps:
        raise UsageError("--fps (or fps in the config) is required for CSV input")
    omega = None
    if args.truth:
        _, omega = io.read_truth(args.truth)
    return io.read_series(args.input, float(fps), omega)


def _system_of(series) -> str:
    return "kuramoto" if series.kind.value == "phase" else "boid"


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    series = _read_input(args, cfg)
    tc = _train_config(args, cfg, _system_of(series))
    result = train(series, tc)
    out = _out(args)
    io.write_coefficients_csv(out / "coefficients.csv", result.tensor)
    io.write_history_csv(out / "history.csv", result.history)
    io.write_json(out / "config.json", {**tc.to_dict(), "sigma": result.sigma})
    (out / "motion.json").write_text(result.model.motion.to_json())
    print(f"final loss {result.history[-1].total:.6g}; outputs in {out}")
    return EXIT_OK


def cmd_infer(args) -> int:
    tensor = io.read_coefficients_csv(args.coefficients)
    out = _out(args)
    gc = aggregate(tensor)
    io.write_json(out / "gc.json", io.gc_document(gc))
    io.write_trace_csv(out / "trace.csv", effect_trace(tensor))
    print(f"wrote {out / 'gc.json'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    gc = io.read_gc(args.gc)
    truth, _ = io.read_truth(args.truth)
    if truth.p != gc.p:
        raise UsageError(f"GC matrix has p={gc.p} but truth has p={truth.p}")
    report = evaluate(gc.magnitude, binarize(gc), truth, signed=not args.unsigned)
    text = io.dumps(report.to_dict())
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _spec(args, cfg) -> ExperimentSpec:
    if args.manifest:
        doc = io.read_json(args.manifest)
        try:
            io.validate_json(doc, "manifest")
        except jsonschema.ValidationError as e:
            raise io.ParseError(args.manifest, None, e.message) from None
        explicit = args.method or args.no_navigation or args.no_tg
        doc = {**doc, "method": _method(args) if explicit else doc.get("method", "abm")}
        if cfg.get("train"):
            doc["train"] = {**doc.get("train", {}), **cfg["train"]}
        return ExperimentSpec.from_manifest(doc)
    if args.system is None:
        raise UsageError("--system is required without --manifest")
    return ExperimentSpec(
        system=args.system, method=_method(args), trials=args.trials, seed=args.seed,
        p=cfg.get("p", args.p), T=cfg.get("T", args.T), train=cfg.get("train", {}),
        te_bins=cfg.get("te_bins", 8))


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.trials is not None and args.trials < 1:
        raise UsageError("--trials must be at least 1")
    args.trials = 10 if args.trials is None else args.trials
    spec = _spec(args, cfg)
    out = _out(args)
    doc = run_experiment(spec, args.jobs)
    io.write_json(out / "manifest.json", spec.manifest())
    io.write_json(out / "results.json", doc)
    io.write_json(out / "metrics.json", doc["summary"])
    _write_summary_csv(out / "summary.csv", {spec.method: doc["summary"]})
    if args.figures:
        from .plotting import plot_summary
        plot_summary({spec.method: doc["summary"]}, out / "summary.png")
    for m, v in doc["summary"].items():
        if v["mean"] is not None:
            print(f"{spec.method:>16} {m:>7} {v['mean']:.3f} ± {v['sd']:.3f} (n={v['n']})")
    if doc["failures"]:
        print(f"{doc['failures']} trial(s) failed; see results.json", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _write_summary_csv(path, summaries: dict[str, dict]) -> None:
    import csv
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(io.CSV_HEADERS["summary"])
        for method, summary in summaries.items():
            for m, v in summary.items():
                fmt = (lambda x: "" if x is None else repr(x))
                w.writerow([method, m, fmt(v["mean"]), fmt(v["sd"]), v["n"]])


def cmd_grid(args) -> int:
    cfg = load_config(args.config)
    if args.system is None:
        raise UsageError("--system is required")
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    grid = cfg.get("grid") or default_grid(args.system)
    seed = args.seed if args.seed is not None else VALIDATION_OFFSET
    res = grid_search(args.system, grid, args.trials, seed, cfg.get("train", {}),
                      score=args.score, jobs=args.jobs, p=cfg.get("p", args.p),
                      T=cfg.get("T", args.T))
    out = _out(args)
    io.write_json(out / "grid.json", res)
    (out / "chosen.yaml").write_text(yaml.safe_dump({"train": res["best"]}, sort_keys=True))
    print(f"best {res['best']}; written {out / 'chosen.yaml'}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    series = _read_input(args, cfg)
    system = _system_of(series)
    tc = _train_config(args, cfg, system)
    result = train(series, tc)
    out = _out(args)
    gc = aggregate(result.tensor)
    trace = effect_trace(result.tensor)
    fps = 1.0 / series.dt
    durations = interaction_durations(trace, fps, args.bin)
    io.write_json(out / "gc.json", io.gc_document(gc))
    io.write_trace_csv(out / "trace.csv", trace)
    io.write_durations_csv(out / "durations.csv", durations)
    io.write_coefficients_csv(out / "coefficients.csv", result.tensor)
    io.write_history_csv(out / "history.csv", result.history)
    if args.figures:
        from .plotting import plot_durations, plot_trace
        plot_trace(trace, out / "trace.png", dt=series.dt)
        plot_durations(durations, out / "durations.png")
    print(f"analysis of {series.p} agents x {series.T} frames written to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    bad = 0
    for path in args.paths:
        try:
            kind = io.validate_file(path)
            print(f"ok {path} ({kind})")
        except (io.ParseError, OSError) as e:
            print(f"invalid {e}", file=sys.stderr)
            bad += 1
    return EXIT_INVALID if bad else EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="abmgc", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, system=True, trials=True):
        if system:
            sp.add_argument("--system", choices=SYSTEMS)
        if trials:
            sp.add_argument("--trials", type=int, default=10)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--config", help="YAML or JSON settings file")
        sp.add_argument("--out", default="out")
        sp.add_argument("--p", type=int, default=5, help="agents per trial")
        sp.add_argument("--T", type=int, default=200, help="frames per trial")

    def ablations(sp):
        sp.add_argument("--no-navigation", action="store_true")
        sp.add_argument("--no-tg", action="store_true")

    def data(sp):
        sp.add_argument("input", help="trajectory or phase CSV")
        sp.add_argument("--fps", type=float, help="frames per second of the input")
        sp.add_argument("--truth", help="ground-truth JSON (supplies oscillator frequencies)")

    sp = sub.add_parser("simulate", help="write simulated trials and ground truth")
    common(sp)
    sp.set_defaults(func=cmd_simulate)
    sp.set_defaults(system="boid")

    sp = sub.add_parser("train", help="fit the model to one CSV")
    data(sp)
    common(sp, system=False, trials=False)
    ablations(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("infer", help="aggregate a coefficient CSV into GC strengths")
    sp.add_argument("coefficients")
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("eval", help="score a GC JSON against ground truth")
    sp.add_argument("gc")
    sp.add_argument("truth")
    sp.add_argument("--unsigned", action="store_true", help="omit the signed BA scores")
    sp.add_argument("--out", help="write the metric JSON here as well")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("experiment", help="replicate trials for one method")
    common(sp)
    sp.set_defaults(trials=None)
    sp.add_argument("--method", choices=METHODS)
    sp.add_argument("--manifest", help="manifest JSON fixing system, seeds and sizes")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--figures", action="store_true", help="also render PNG figures")
    ablations(sp)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("grid", help="hyperparameter search on validation trials")
    common(sp)
    sp.set_defaults(trials=5, seed=None)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--score", default="ba", choices=["ba", "auroc", "auprc", "acc"])
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("analyze", help="train on one trajectory CSV and report interactions")
    data(sp)
    common(sp, system=False, trials=False)
    ablations(sp)
    sp.add_argument("--bin", type=float, default=10.0, help="duration bin length in seconds")
    sp.add_argument("--figures", action="store_true", help="also render PNG figures")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("validate", help="check output files against their schemas")
    sp.add_argument("paths", nargs="+")
    sp.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # usage errors and --help
        return e.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (UsageError, io.ParseError, jsonschema.ValidationError, LengthError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # anything else is a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
