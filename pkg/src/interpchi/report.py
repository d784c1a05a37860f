"""Report rows and their renderings: a plain-text table, CSV and JSON.

Every row carries the method that produced the value and the tolerance it was
judged by.  Rows with ``passed=None`` are informational and never affect the
exit code.  Nothing time-dependent goes into a report, so identical configs
give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np


@dataclass
class Check:
    method: str
    value: float
    tolerance: float | None = None
    passed: bool | None = None
    t: float | None = None

    def as_row(self) -> dict:
        return {
            "method": self.method,
            "t": "" if self.t is None else repr(float(self.t)),
            "value": repr(float(self.value)),
            "tolerance": "" if self.tolerance is None else repr(float(self.tolerance)),
            "pass": "" if self.passed is None else str(bool(self.passed)).lower(),
        }


def within(method: str, value: float, target: float, tol: float, t: float | None = None) -> Check:
    return Check(method, float(value), tol, bool(abs(value - target) < tol), t)


def bounded(method: str, value: float, tol: float, t: float | None = None) -> Check:
    """A residual that must stay below ``tol``."""
    return Check(method, float(value), tol, bool(abs(value) < tol), t)


@dataclass
class Report:
    command: str
    checks: list[Check] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)
    config: dict | None = None

    @property
    def ok(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["method", "t", "value", "tolerance", "pass"], lineterminator="\n")
        writer.writeheader()
        for c in self.checks:
            writer.writerow(c.as_row())
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "ok": self.ok,
            "checks": [asdict(c) for c in self.checks],
            "details": self.details,
            "config": self.config,
        }
        return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        rows = [c.as_row() for c in self.checks]
        head = ["method", "t", "value", "tolerance", "pass"]
        shown = [
            [r["method"], r["t"], _short(r["value"]), _short(r["tolerance"]), r["pass"] or "-"] for r in rows
        ]
        widths = [max(len(h), *(len(s[i]) for s in shown)) if shown else len(h) for i, h in enumerate(head)]
        line = "  ".join(h.ljust(w) for h, w in zip(head, widths))
        out = [f"[{self.command}]", line, "-" * len(line)]
        out += ["  ".join(s.ljust(w) for s, w in zip(row, widths)) for row in shown]
        out.append(f"result: {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(out) + "\n"


def _short(s: str) -> str:
    if not s:
        return ""
    return f"{float(s):.6g}"


def _plain(x):
    """Convert numpy scalars and arrays into JSON-native values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    return x
