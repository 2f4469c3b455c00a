"""Run reports: timeseries, summary scalars, acceptance checks, CSV output."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


class ReportError(RuntimeError):
    pass


@dataclass
class Check:
    """One acceptance check: measured value against a threshold."""

    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    @classmethod
    def le(cls, name, value, threshold, detail=""):
        return cls(name, float(value), float(threshold),
                   bool(value <= threshold), detail)

    @classmethod
    def holds(cls, name, condition, detail=""):
        return cls(name, 1.0 if condition else 0.0, 1.0, bool(condition), detail)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return (f"[{tag}] {self.name}: {self.value:.6g} "
                f"(threshold {self.threshold:.6g}){extra}")


@dataclass
class Report:
    benchmark: str
    method: str
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def add_row(self, values):
        row = [float(v) for v in values]
        if len(row) != len(self.columns):
            raise ReportError("row length does not match columns")
        if self.rows and self.columns and self.columns[0] == "time":
            if row[0] < self.rows[-1][0]:
                raise ReportError("time column must be monotone")
        self.rows.append(row)

    def column(self, name):
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def table(self):
        lines = [c.line() for c in self.checks]
        verdict = "ALL CHECKS PASSED" if self.passed else "CHECKS FAILED"
        return "\n".join(lines + [verdict]) if lines else "no checks"


def format_csv(columns, rows):
    """Header plus comma-separated rows at 17 significant digits."""
    out = [",".join(columns)]
    for row in rows:
        out.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(out) + "\n"


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_csv(columns, rows))


def artifact_version(config_text):
    """Short content hash identifying the exact configuration of a run."""
    from .. import __version__

    digest = hashlib.sha1(config_text.encode("utf-8")).hexdigest()[:12]
    return f"flowlab-{__version__}+cfg.{digest}"


def write_report(out_dir, report, config_text):
    """Emit timeseries.csv, summary.txt, and the config echo into out_dir."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    if report.rows:
        write_csv(os.path.join(out_dir, "timeseries.csv"),
                  report.columns, report.rows)
    with open(os.path.join(out_dir, "config_echo.toml"), "w",
              encoding="utf-8") as fh:
        fh.write(config_text)
    lines = [
        f"benchmark = {report.benchmark}",
        f"method = {report.method}",
        f"version = {artifact_version(config_text)}",
        "",
    ]
    for key, value in report.summary.items():
        if isinstance(value, float):
            lines.append(f"{key} = {value:.17g}")
        else:
            lines.append(f"{key} = {value}")
    lines += ["", report.table(), ""]
    with open(os.path.join(out_dir, "summary.txt"), "w",
              encoding="utf-8") as fh:
        fh.write("\n".join(lines))
