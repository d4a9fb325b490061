"""File formats: trajectory/phase CSV, ground truth, GC matrices, traces,
coefficients, loss histories, metric reports and run manifests.

Every JSON document written here has a schema in :data:`SCHEMAS`; CSV files
are checked by header.  Readers raise :class:`ParseError` naming the
offending line.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .core import CausalGraph, SeriesKind, TrajectorySeries
from .abm import BlockLayout, CoefficientTensor
from .inference import Durations, EffectTrace, GCMatrix, binarize, threshold


class ParseError(ValueError):
    def __init__(self, path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


# -- json helpers --------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, NaN to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj) -> str:
    """Canonical JSON text (sorted keys, fixed indent) so equal inputs give equal bytes."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(path, e.lineno, e.msg) from None


_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_SIGNED = {"type": "array", "items": {"type": "array", "items": {"enum": [-1, 0, 1]}}}
_METRIC = {"type": ["number", "null"], "minimum": 0, "maximum": 1}

SCHEMAS: dict[str, dict] = {
    "truth": {
        "type": "object",
        "required": ["p"],
        "properties": {
            "p": {"type": "integer", "minimum": 2},
            "edges": _SIGNED,
            "relations": _SIGNED,
            "omega": {"type": "array", "items": {"type": "number"}},
        },
        "oneOf": [{"required": ["edges"]}, {"required": ["relations"]}],
    },
    "gc": {
        "type": "object",
        "required": ["p", "strengths", "binary", "signs"],
        "properties": {
            "p": {"type": "integer", "minimum": 1},
            "strengths": _MATRIX,
            "binary": _SIGNED,
            "signs": _SIGNED,
            "threshold": {"type": "number"},
        },
    },
    "metrics": {
        "type": "object",
        "required": ["auroc", "auprc", "acc", "ba", "ba_pos", "ba_neg"],
        "properties": {k: _METRIC for k in ("auroc", "auprc", "acc", "ba", "ba_pos", "ba_neg")},
    },
    "summary": {
        "type": "object",
        "required": ["ba"],
        "additionalProperties": {
            "type": "object",
            "required": ["mean", "sd", "n"],
            "properties": {
                "mean": _METRIC,
                "sd": {"type": ["number", "null"], "minimum": 0},
                "n": {"type": "integer", "minimum": 0},
            },
        },
    },
    "manifest": {
        "type": "object",
        "required": ["system", "trials", "seeds", "T", "p"],
        "properties": {
            "system": {"enum": ["boid", "kuramoto"]},
            "trials": {"type": "integer", "minimum": 1},
            "seeds": {"type": "array", "items": {"type": "integer"}},
            "T": {"type": "integer", "minimum": 2},
            "p": {"type": "integer", "minimum": 2},
        },
    },
    "experiment": {
        "type": "object",
        "required": ["system", "method", "trials", "summary"],
        "properties": {
            "trials": {"type": "array", "items": {"type": "object"}},
            "summary": {"type": "object"},
        },
    },
}


def validate_json(obj, kind: str) -> None:
    """Raise :class:`jsonschema.ValidationError` if ``obj`` does not fit schema ``kind``."""
    jsonschema.validate(obj, SCHEMAS[kind])


# -- trajectories ------------------------------------------------------------

def _rows(path):
    """Yield (line number, dict row) from a CSV file with a header."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(path, 1, "empty file")
        yield reader.fieldnames
        for row in reader:
            if None in row or any(v is None for v in row.values()):
                raise ParseError(path, reader.line_num, "wrong number of fields")
            yield reader.line_num, row


def _number(path, line, row, key, cast=float):
    try:
        v = cast(row[key])
    except (TypeError, ValueError):
        raise ParseError(path, line, f"column {key!r}: cannot parse {row[key]!r}") from None
    if cast is float and not math.isfinite(v):
        raise ParseError(path, line, f"column {key!r}: non-finite value")
    return v


def _grid(path, records, cols):
    """Assemble ``{(frame, agent): [values]}`` into a dense ``[T, p, len(cols)]`` array."""
    frames = max(f for f, _ in records) + 1
    agents = max(a for _, a in records) + 1
    if len(records) != frames * agents:
        raise ParseError(path, None,
                         f"expected every agent 0..{agents - 1} in every frame 0..{frames - 1}")
    out = np.empty((frames, agents, cols))
    for (f, a), v in records.items():
        out[f, a] = v
    return out


def _read_long(path, value_cols, optional=()):
    it = _rows(path)
    header = next(it)
    missing = [c for c in ("frame", "agent", *value_cols) if c not in header]
    if missing:
        raise ParseError(path, 1, f"missing column(s) {', '.join(missing)}")
    present_opt = [c for c in optional if c in header]
    records: dict[tuple[int, int], list[float]] = {}
    for line, row in it:
        f = _number(path, line, row, "frame", int)
        a = _number(path, line, row, "agent", int)
        if f < 0 or a < 0:
            raise ParseError(path, line, "frame and agent must be non-negative")
        if (f, a) in records:
            raise ParseError(path, line, f"duplicate row for frame {f}, agent {a}")
        records[(f, a)] = [_number(path, line, row, c) for c in (*value_cols, *present_opt)]
    if not records:
        raise ParseError(path, 2, "no data rows")
    return _grid(path, records, len(value_cols) + len(present_opt)), present_opt


def read_trajectory_csv(path, fps: float) -> TrajectorySeries:
    """``frame,agent,x,y[,z]`` positions sampled at ``fps``; velocities by forward difference."""
    if not fps > 0:
        raise ValueError("fps must be positive")
    with Path(path).open(newline="") as fh:
        header = next(csv.reader(fh), None) or []
    cols = ["x", "y"] + (["z"] if "z" in header else [])
    pos, _ = _read_long(path, cols)
    if pos.shape[0] < 2:
        raise ParseError(path, None, "need at least two frames")
    return TrajectorySeries.from_positions(pos, 1.0 / fps)


def write_trajectory_csv(path, series: TrajectorySeries) -> None:
    if series.kind is not SeriesKind.POSITIONAL:
        raise ValueError("not a positional series")
    names = ["x", "y", "z"][: series.dim]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "agent", *names])
        for t in range(series.T):
            for a in range(series.p):
                w.writerow([t, a, *(repr(float(v)) for v in series.positions[t, a])])


def read_phase_csv(path, fps: float, omega=None) -> TrajectorySeries:
    """``frame,agent,phase[,dphi]``; a missing ``dphi`` column is filled by forward difference."""
    if not fps > 0:
        raise ValueError("fps must be positive")
    vals, opt = _read_long(path, ["phase"], optional=["dphi"])
    dt = 1.0 / fps
    phi = vals[:, :, 0]
    if opt:
        dphi = vals[:, :, 1]
    else:
        if phi.shape[0] < 2:
            raise ParseError(path, None, "need at least two frames")
        dphi = np.empty_like(phi)
        dphi[:-1] = np.diff(phi, axis=0) / dt
        dphi[-1] = dphi[-2]
    return TrajectorySeries(np.stack([phi, dphi], axis=2), dt, SeriesKind.PHASE, omega)


def write_phase_csv(path, series: TrajectorySeries) -> None:
    if series.kind is not SeriesKind.PHASE:
        raise ValueError("not a phase series")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "agent", "phase", "dphi"])
        for t in range(series.T):
            for a in range(series.p):
                phi, dphi = series.values[t, a]
                w.writerow([t, a, repr(float(phi)), repr(float(dphi))])


def read_series(path, fps: float, omega=None) -> TrajectorySeries:
    """Dispatch on the header: a ``phase`` column means an oscillator file."""
    with Path(path).open(newline="") as fh:
        header = next(csv.reader(fh), None) or []
    if "phase" in header:
        return read_phase_csv(path, fps, omega)
    return read_trajectory_csv(path, fps)


# -- ground truth --------------------------------------------------------------

def truth_document(graph: CausalGraph, omega=None) -> dict:
    if omega is not None:
        return {"p": graph.p, "edges": graph.edges, "omega": np.asarray(omega)}
    return {"p": graph.p, "relations": graph.edges}


def read_truth(path) -> tuple[CausalGraph, np.ndarray | None]:
    doc = read_json(path)
    try:
        validate_json(doc, "truth")
    except jsonschema.ValidationError as e:
        raise ParseError(path, None, e.message) from None
    edges = np.array(doc.get("edges", doc.get("relations")), dtype=int)
    if edges.shape != (doc["p"], doc["p"]):
        raise ParseError(path, None, f"edge matrix shape {edges.shape} does not match p={doc['p']}")
    omega = np.array(doc["omega"], float) if "omega" in doc else None
    return CausalGraph(edges), omega


# -- results ------------------------------------------------------------------

def gc_document(gc: GCMatrix) -> dict:
    return {
        "p": gc.p,
        "strengths": gc.strengths,
        "signs": gc.sign,
        "binary": binarize(gc).edges,
        "threshold": threshold(gc.magnitude),
    }


def read_gc(path) -> GCMatrix:
    doc = read_json(path)
    try:
        validate_json(doc, "gc")
    except jsonschema.ValidationError as e:
        raise ParseError(path, None, e.message) from None
    s = np.array(doc["strengths"], float)
    return GCMatrix.from_parts(np.abs(s), np.array(doc["signs"], int))


def write_trace_csv(path, trace: EffectTrace) -> None:
    T, p, _ = trace.s.shape
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "i", "j", "value"])
        for t in range(T):
            for i in range(p):
                for j in range(p):
                    if i != j:
                        w.writerow([t, i, j, repr(float(trace.s[t, i, j]))])


def read_trace_csv(path) -> EffectTrace:
    it = _rows(path)
    header = next(it)
    missing = [c for c in ("t", "i", "j", "value") if c not in header]
    if missing:
        raise ParseError(path, 1, f"missing column(s) {', '.join(missing)}")
    rows = [(line, _number(path, line, r, "t", int), _number(path, line, r, "i", int),
             _number(path, line, r, "j", int), _number(path, line, r, "value")) for line, r in it]
    if not rows:
        raise ParseError(path, 2, "no data rows")
    T = max(r[1] for r in rows) + 1
    p = max(max(r[2], r[3]) for r in rows) + 1
    s = np.zeros((T, p, p))
    for _, t, i, j, v in rows:
        s[t, i, j] = v
    return EffectTrace(s)


def write_coefficients_csv(path, tensor: CoefficientTensor) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "i", "k", "u", "j", "q", "value"])
        for t, i, k, u, j, q, v in tensor.to_rows():
            w.writerow([t, i, k, u, j, q, repr(v)])


def read_coefficients_csv(path) -> CoefficientTensor:
    """Rebuild a coefficient tensor; the block layout is recovered from the (j, q) pairs."""
    it = _rows(path)
    header = next(it)
    cols = CSV_HEADERS["coefficients"]
    missing = [c for c in cols if c not in header]
    if missing:
        raise ParseError(path, 1, f"missing column(s) {', '.join(missing)}")
    rows = []
    for line, r in it:
        t, i, k, u, j, q = (_number(path, line, r, c, int) for c in cols[:-1])
        if min(t, i, u, j, q) < 0 or k < 1:
            raise ParseError(path, line, "negative index or lag < 1")
        rows.append((t, i, k, u, j, q, _number(path, line, r, "value")))
    if not rows:
        raise ParseError(path, 2, "no data rows")
    a = np.array(rows)
    T, p, K, d = (int(a[:, c].max()) + 1 for c in (0, 1, 2, 3))
    K -= 1
    self_q = a[a[:, 1] == a[:, 4]][:, 5]
    other_q = a[a[:, 1] != a[:, 4]][:, 5]
    d_self = int(self_q.max()) + 1
    d_r = int(other_q.max()) + 1 if other_q.size else 0
    layout = BlockLayout(p, d_self, d_r)
    if len(rows) != T * p * K * d * layout.d_h:
        raise ParseError(path, None, "coefficient table is incomplete")
    psi = np.zeros((T, p, K, d, layout.d_h))
    for t, i, k, u, j, q, v in rows:
        psi[t, i, k - 1, u, layout.cols(i, j).start + q] = v
    return CoefficientTensor(psi, layout)


def write_history_csv(path, history) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "prediction", "sparsity", "theory_guided", "smoothing", "total"])
        for e, h in enumerate(history):
            w.writerow([e, *(repr(float(x)) for x in
                             (h.prediction, h.sparsity, h.theory_guided, h.smoothing, h.total))])


def write_durations_csv(path, durations: Durations) -> None:
    """One row per (bin, source, target, movement sign) with the time spent in seconds."""
    n_bins, p, _ = durations.attraction.shape
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "start_s", "i", "j", "sign", "seconds"])
        for b in range(n_bins):
            start = b * durations.bin_seconds
            for i in range(p):
                for j in range(p):
                    if i == j:
                        continue
                    w.writerow([b, repr(start), i, j, "+", repr(float(durations.attraction[b, i, j]))])
                    w.writerow([b, repr(start), i, j, "-", repr(float(durations.repulsion[b, i, j]))])


CSV_HEADERS = {
    "trajectory": ["frame", "agent", "x", "y"],
    "phase": ["frame", "agent", "phase"],
    "trace": ["t", "i", "j", "value"],
    "coefficients": ["t", "i", "k", "u", "j", "q", "value"],
    "history": ["epoch", "prediction", "sparsity", "theory_guided", "smoothing", "total"],
    "durations": ["bin", "start_s", "i", "j", "sign", "seconds"],
    "summary": ["method", "metric", "mean", "sd", "n"],
}


def validate_file(path) -> str:
    """Check one output file against its schema or header; return the detected kind."""
    path = Path(path)
    if path.suffix == ".json":
        doc = read_json(path)
        for kind in ("gc", "truth", "metrics", "summary", "manifest", "experiment"):
            try:
                validate_json(doc, kind)
                return kind
            except jsonschema.ValidationError:
                continue
        raise ParseError(path, None, "matches no known JSON schema")
    if path.suffix == ".csv":
        with path.open(newline="") as fh:
            header = next(csv.reader(fh), None) or []
        for kind, cols in CSV_HEADERS.items():
            if all(c in header for c in cols) and len(header) <= len(cols) + 1:
                for line, row in list(_rows(path))[1:]:
                    for c in cols:
                        if c not in ("sign", "method", "metric") and row[c] != "":
                            _number(path, line, row, c)
                return kind
        raise ParseError(path, 1, f"unrecognised header {header}")
    raise ParseError(path, None, "unsupported file type")
