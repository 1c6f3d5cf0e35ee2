"""Certification reports and report bundles.

Every certification operation returns a :class:`CertReport`: the measured
best constant for one named inequality, the witness that attains it, the
test family it was measured over, and pass/fail against an optional budget.
Bundles collect suite reports into a versioned, canonically serialized JSON
document (fixed key order, no timestamps) so seeded runs are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, asdict

SCHEMA_VERSION = "1.0"

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not-applicable"
INFEASIBLE = "infeasible"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "tolist"):
        return _jsonable(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return {math.inf: "inf", -math.inf: "-inf"}.get(x, "nan")
    return x


@dataclass
class CertReport:
    inequality: str
    constant: float
    witness: dict = field(default_factory=dict)
    family: str = ""
    budget: float | None = None
    status: str = PASS
    notes: str = ""
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status in (PASS, NOT_APPLICABLE)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def row(self, **extra) -> dict:
        r = {"inequality": self.inequality, "constant": self.constant,
             "status": self.status, "family": self.family}
        r.update(extra)
        return r


@dataclass
class ReportBundle:
    seed: int
    config: dict = field(default_factory=dict)
    suites: dict = field(default_factory=dict)
    version: str = SCHEMA_VERSION

    def add(self, suite: str, reports, extras: dict | None = None):
        entry = {"reports": [r.to_dict() for r in reports]}
        if extras:
            entry.update(_jsonable(extras))
        self.suites[suite] = entry

    def all_passed(self) -> bool:
        for entry in self.suites.values():
            for r in entry.get("reports", []):
                if r["status"] not in (PASS, NOT_APPLICABLE):
                    return False
        return True

    def to_json(self) -> str:
        doc = {"version": self.version, "seed": self.seed,
               "config": _jsonable(self.config), "suites": self.suites}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), indent=None)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ReportBundle":
        with open(path) as fh:
            doc = json.load(fh)
        major = str(doc.get("version", "")).split(".")[0]
        if major != SCHEMA_VERSION.split(".")[0]:
            raise ValueError(f"unsupported report schema version {doc.get('version')!r}")
        return cls(seed=doc["seed"], config=doc.get("config", {}),
                   suites=doc.get("suites", {}), version=doc["version"])


def suite_csv(reports, extra_cols=()) -> str:
    """Long-format CSV for one suite: a row per report."""
    cols = ["inequality", "constant", "status", "family", *extra_cols]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.row() if isinstance(r, CertReport) else r)
    return buf.getvalue()


def append_ledger(path, report: CertReport, level="", ball="", timestamp=""):
    """Append one row to a flat CSV ledger (creates the header on first use)."""
    import os
    new = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(["inequality", "constant", "level", "ball", "family", "timestamp"])
        writer.writerow([report.inequality, report.constant, level, ball,
                         report.family, timestamp])
