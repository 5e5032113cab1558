"""Result files: a per-record CSV table and a canonical JSON summary.

``records.csv`` columns: repeat, fold, strategy, subset, model, hyperparams
(compact JSON with sorted keys), auc_roc, auc_prc.  Floats use Python's
shortest round-trip form.  ``summary.json`` is written with sorted keys and
two-space indentation and never contains timestamps, so identical runs give
identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cv import MetricsRecord

RECORD_COLUMNS = ("repeat", "fold", "strategy", "subset", "model", "hyperparams",
                  "auc_roc", "auc_prc")


def records_to_csv(records: Iterable[MetricsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in sorted(records, key=lambda r: (r.strategy, r.subset, r.model, r.key)):
        w.writerow([r.repeat, r.fold, r.strategy, r.subset, r.model,
                    json.dumps(r.hyperparams, sort_keys=True, separators=(",", ":")),
                    repr(float(r.auc_roc)), repr(float(r.auc_prc))])
    return buf.getvalue()


def write_records(records: Iterable[MetricsRecord], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(records_to_csv(records), encoding="utf-8")
    return path


def read_records(path: str | Path) -> list[MetricsRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [MetricsRecord(int(r["repeat"]), int(r["fold"]), r["strategy"], r["subset"],
                          r["model"], json.loads(r["hyperparams"]), float(r["auc_roc"]),
                          float(r["auc_prc"])) for r in rows]


def to_jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(to_jsonable(k) if isinstance(k, Enum) else k): to_jsonable(v)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.label if hasattr(obj, "label") else obj.value
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_summary(summary: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(canonical_json(summary), encoding="utf-8")
    return path


def comparison_table(rows: Sequence[dict]) -> str:
    """Plain-text table: configuration, mean, SD, CI and p against a reference."""
    head = f"{'configuration':<28} {'metric':<8} {'mean':>7} {'sd':>7} {'ci_lo':>7} {'ci_hi':>7} {'p':>9}"
    lines = [head, "-" * len(head)]
    for r in rows:
        p = r.get("p_value")
        lines.append(f"{r['name']:<28} {r['metric']:<8} {r['mean']:7.4f} {r['sd']:7.4f} "
                     f"{r['ci_lo']:7.4f} {r['ci_hi']:7.4f} "
                     f"{'' if p is None else format(p, '9.3g'):>9}")
    return "\n".join(lines) + "\n"
