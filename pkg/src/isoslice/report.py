"""Structured records of verification and pipeline runs, with JSON/CSV output."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .estimate import Estimate

CSV_COLUMNS = ["id", "body", "check", "passed", "quantity", "value", "std_error"]


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


def _plain(obj):
    """Convert numpy / Estimate values into JSON-compatible structures."""
    if isinstance(obj, Estimate):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class Report:
    """Inputs, constants, measured quantities and pass/fail checks of one run."""

    id: str
    body: str = ""
    params: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def check(self, name: str, passed, detail: str = "") -> bool:
        passed = bool(passed)
        self.checks.append(Check(name, passed, detail))
        return passed

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, key):
        return self.values[key]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "body": self.body,
            "passed": self.passed,
            "params": _plain(self.params),
            "values": _plain(self.values),
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        missing = {"id", "values", "checks"} - set(d)
        if missing:
            raise ValueError(f"report schema mismatch: missing {sorted(missing)}")
        r = cls(d["id"], d.get("body", ""), d.get("params", {}), d["values"])
        for c in d["checks"]:
            r.checks.append(Check(c["name"], bool(c["passed"]), c.get("detail", "")))
        return r

    def rows(self):
        """Flat rows, one per (check, scalar quantity)."""
        scalars = []
        for key, v in sorted(_plain(self.values).items()):
            if isinstance(v, dict) and "value" in v:
                scalars.append((key, v["value"], v.get("std_error", 0.0)))
            elif isinstance(v, (int, float, str)) and not isinstance(v, bool):
                scalars.append((key, v, 0.0))
        checks = self.checks or [Check("(none)", True)]
        for c in checks:
            for key, val, err in scalars or [("", "", "")]:
                yield [self.id, self.body, c.name, c.passed, key, val, err]


def render_csv(reports) -> str:
    """RFC-4180 CSV of all reports, sorted by (id, body)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(reports, key=lambda r: (r.id, r.body)):
        for row in r.rows():
            w.writerow(row)
    return buf.getvalue()
