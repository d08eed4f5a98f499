"""Deterministic file output: CSV tables, JSON documents, run manifests and
log-log plot data."""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np
import scipy

from .. import __version__

SCALING_COLUMNS = ("preset", "param", "T", "B", "policy", "mean_obj", "stderr",
                   "abs_loss", "abs_loss_stderr", "rel_loss", "reps", "benchmark")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return "" if v is None else str(v)


def _ensure_dir(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path.parent}: {exc}") from None


def write_csv(path, columns, rows) -> Path:
    """Write rows (dicts) under a fixed header; an empty table keeps the header."""
    path = Path(path)
    _ensure_dir(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, doc) -> Path:
    path = Path(path)
    _ensure_dir(path)
    path.write_text(json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n")
    return path


def versions() -> dict:
    return {"srmns": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(out_dir, command: str, config: dict, seeds: dict, gates: dict | None = None,
                   notes: dict | None = None) -> Path:
    doc = {"command": command, "config": config, "seeds": seeds, "versions": versions(),
           "gates": gates or {}, "notes": notes or {}}
    return write_json(Path(out_dir) / "manifest.json", doc)


def report_rows(preset: str, reports) -> list[dict]:
    rows = []
    for rep in reports:
        for row in rep.rows():
            rows.append({"preset": preset, "param": rep.label, "reps": rep.reps,
                         "benchmark": rep.benchmark, **row})
    return rows


def loglog_rows(rows, x: str, y: str, series: str = "policy") -> list[dict]:
    """(x, y, log x, log y) per row with positive x and y, grouped by ``series``."""
    out = []
    for row in rows:
        xv, yv = row.get(x), row.get(y)
        if xv is None or yv is None or not (xv > 0 and yv > 0):
            continue
        out.append({"series": row.get(series, ""), "x": xv, "y": yv,
                    "log_x": math.log(xv), "log_y": math.log(yv)})
    return out


LOGLOG_COLUMNS = ("series", "x", "y", "log_x", "log_y")


def write_table(out_dir, stem: str, columns, rows, fmt: str = "csv") -> Path:
    if fmt == "json":
        return write_json(Path(out_dir) / f"{stem}.json", {"columns": list(columns), "rows": rows})
    return write_csv(Path(out_dir) / f"{stem}.csv", columns, rows)
