"""
Report files of experiment runs.

A report has a `header` (when and how it was produced) and a `body`. The body only
depends on the experiment and the effective settings, so runs of the same
experiment with the same seed produce byte-identical bodies.
"""
from __future__ import annotations

import csv
import json
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .util import ExitCode, Record, to_jsonable


class Status(str, Enum):
    """Overall outcome of an experiment."""

    PASS = "pass"
    FAIL = "fail"
    ABSTAIN = "abstain"

    @property
    def exit_code(self) -> ExitCode:
        return {
            Status.PASS: ExitCode.PASS,
            Status.FAIL: ExitCode.FAIL,
            Status.ABSTAIN: ExitCode.ABSTAIN,
        }[self]


class ReportHeader(Record):
    timestamp: datetime
    version: str
    command: str
    """The command line (or caller) that produced the report."""

    @classmethod
    def now(cls, command: str) -> ReportHeader:
        return cls(timestamp=datetime.now(), version=__version__, command=command)


class ReportBody(Record):
    """Inputs, exact values, estimates and verdicts of one experiment."""

    experiment: str
    inputs: Dict[str, Any]
    """The experiment as run, including all defaults and overrides."""

    exact: Dict[str, Any] = {}
    """Results of exact computations (rationals as 'n/d' strings)."""

    estimated: Dict[str, Any] = {}
    """Monte Carlo estimates with their confidence intervals."""

    verdicts: Dict[str, bool] = {}
    status: Status = Status.PASS
    message: Optional[str] = None
    """Why the run abstained, if it did."""

    files: List[str] = []
    """Names of the additional files written next to the report."""

    def verdict(self, name: str, value: bool) -> None:
        self.verdicts[name] = bool(value)

    def finish(self) -> None:
        """Derive the status from the verdicts (unless the run abstained)."""
        if self.status != Status.ABSTAIN:
            ok = all(self.verdicts.values())
            self.status = Status.PASS if ok else Status.FAIL


class Report(Record):
    header: ReportHeader
    body: ReportBody

    def body_json(self) -> str:
        """The canonical serialization of the body."""
        return json.dumps(to_jsonable(self.body), indent=2)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    """Write a table, rendering exact values like the JSON reports do."""
    with open(path, "w", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(header)
        for row in rows:
            writer.writerow([to_jsonable(v) for v in row])
