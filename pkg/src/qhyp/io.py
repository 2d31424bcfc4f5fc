"""CSV/JSON serialization of records and error curves."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dynamics import TrajectoryRecord
from .model import DetectionScheme

CURVE_COLUMNS = (
    "t",
    "qe_signal",
    "stderr_signal",
    "qe_projection",
    "stderr_projection",
    "qe_bound",
    "qe_unmonitored",
)


def fmt(x) -> str:
    """Shortest text that round-trips a float exactly; empty for missing values."""
    if x is None:
        return ""
    return repr(float(x))


def _parse(text: str):
    return None if text == "" else float(text)


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_record(record: TrajectoryRecord, path) -> Path:
    """Write a record as ``step,dN,dY`` rows plus a JSON sidecar with seed and scheme."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "dN", "dY"])
        for n in range(record.n_steps):
            dN = "" if record.dN is None else str(int(record.dN[n]))
            dY = "" if record.dY is None else fmt(record.dY[n])
            w.writerow([n, dN, dY])
    meta = {
        "seed": int(record.seed),
        "stream_id": list(record.stream_id),
        "n_steps": int(record.n_steps),
        "scheme": asdict(record.scheme),
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_record(path) -> TrajectoryRecord:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    scheme = DetectionScheme(**meta["scheme"])
    dN, dY = [], []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["step", "dN", "dY"]:
            raise ValueError(f"{path}: expected header step,dN,dY, got {reader.fieldnames}")
        for row in reader:
            dN.append(row["dN"])
            dY.append(row["dY"])
    n = len(dN)
    if n != meta["n_steps"]:
        raise ValueError(f"{path}: {n} rows but sidecar says {meta['n_steps']} steps")
    dN_col = None if all(v == "" for v in dN) else np.array([int(v) for v in dN], dtype=np.int8)
    dY_col = None if all(v == "" for v in dY) else np.array([float(v) for v in dY])
    return TrajectoryRecord(scheme, n, dN_col, dY_col, meta["seed"], tuple(meta["stream_id"]))


def write_curve_columns(path, columns: dict) -> Path:
    """Write the error-curve CSV; absent columns are left empty."""
    path = Path(path)
    n = len(columns["t"])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for g in range(n):
            w.writerow([fmt(None if columns.get(c) is None else columns[c][g]) for c in CURVE_COLUMNS])
    return path


def write_error_curve(curve, path) -> Path:
    return write_curve_columns(
        path,
        {
            "t": curve.times,
            "qe_signal": curve.qe_signal,
            "stderr_signal": curve.stderr_signal,
            "qe_projection": curve.qe_projection,
            "stderr_projection": curve.stderr_projection,
            "qe_bound": curve.qe_bound,
            "qe_unmonitored": curve.qe_unmonitored,
        },
    )


def read_error_curve(path) -> dict[str, np.ndarray | None]:
    """Columns of an error-curve CSV; a column that is empty throughout maps to None."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CURVE_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = list(reader)
    out: dict[str, np.ndarray | None] = {}
    for c in CURVE_COLUMNS:
        vals = [_parse(r[c]) for r in rows]
        out[c] = None if all(v is None for v in vals) else np.array([np.nan if v is None else v for v in vals])
    return out


def write_counts(curve, path) -> Path:
    """Assignment counts n_i^(j)(t) in long format: t,assigned,true,count."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "assigned", "true", "count", "M"])
        H = curve.counts.shape[1]
        for g, t in enumerate(curve.times):
            for i in range(H):
                for j in range(H):
                    w.writerow([fmt(t), i, j, int(curve.counts[g, i, j]), curve.M])
    return path
