"""CSV / JSON / plot-data writers for scenario runs."""

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = "1.0"


@dataclass
class Check:
    name: str
    measured: float
    threshold: object
    comparator: str  # "<=", ">=", "in", ">"
    passed: bool = None

    def __post_init__(self):
        if self.passed is None:
            self.passed = evaluate(self.measured, self.comparator, self.threshold)

    def as_dict(self):
        return {"name": self.name, "measured": _jsonable(self.measured), "threshold": _jsonable(self.threshold),
                "comparator": self.comparator, "passed": bool(self.passed)}


def evaluate(measured, comparator, threshold):
    if measured is None or (isinstance(measured, float) and math.isnan(measured)):
        return False
    if comparator == "<=":
        return measured <= threshold
    if comparator == "<":
        return measured < threshold
    if comparator == ">=":
        return measured >= threshold
    if comparator == ">":
        return measured > threshold
    if comparator == "in":
        lo, hi = threshold
        return lo <= measured <= hi
    if comparator == "==":
        return measured == threshold
    raise ValueError(f"unknown comparator {comparator!r}")


@dataclass
class Series:
    name: str
    x_label: str
    y_label: str
    x: list
    y: list


@dataclass
class Result:
    records: list
    checks: list
    series: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def _cell(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def csv_text(records):
    """RFC-4180 CSV of a list of flat dicts (union of keys, first-seen order)."""
    if not records:
        raise ValueError("no records to write")
    cols = []
    for r in records:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(cols)
    for r in records:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def plot_text(series):
    out = []
    for s in series:
        out.append(f"# series: {s.name}")
        out.append(f"# columns: {s.x_label} {s.y_label}")
        for x, y in zip(s.x, s.y):
            out.append(f"{float(x):.17g} {float(y):.17g}")
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def emit_report(records, summary, paths, series=()):
    """Write the CSV, JSON summary and plot-data files; returns the paths."""
    if not records:
        raise ValueError("records must be nonempty")
    body = csv_text(records)
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(_jsonable(summary))
    plot = plot_text(series)
    written = {}
    for key, text in (("csv", body), ("json", json.dumps(doc, indent=2, sort_keys=False) + "\n"), ("plot", plot)):
        path = paths[key]
        try:
            d = os.path.dirname(path)
            if d:
                os.makedirs(d, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as e:
            raise OSError(f"cannot write {path}: {e.strerror or e}") from e
        written[key] = path
    return written
