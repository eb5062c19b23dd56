"""Consistency auditor for published metric rows.

Given a reported (accuracy, precision, recall, f1) tuple at 4-decimal
granularity and a test-set size N, enumerate every nonnegative integer
confusion matrix (tp, fp, fn, tn) summing to N and report which ones
reproduce all four metrics within tolerance. Useful forensics: a row
admitting no matrix cannot have been computed from any labeling of N
cases, and the positives count tp+fn of the matches exposes the hidden
positive-class convention.

The enumeration prunes by the recall window over tp+fn and the
precision/accuracy windows over fp; the pruning conditions are necessary,
so no matrix inside tolerance is missed. The best fit is exact: the
tolerance radius is widened geometrically until candidates appear, and
any matrix whose worst-metric residual is minimal lies inside the first
nonempty radius.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import BoundExceededError, FormatError

MAX_N = 10_000
DEFAULT_TOLERANCE = 1e-4
_EPS = 1e-9


@dataclass(frozen=True)
class ReportedRow:
    name: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    n: int


@dataclass(frozen=True)
class CandidateMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    residual: float

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.tp, self.fp, self.fn, self.tn)


@dataclass(frozen=True)
class AuditResult:
    input: ReportedRow
    matches: list[CandidateMatrix]
    best_fit: CandidateMatrix
    consistent: bool
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "name": self.input.name,
            "reported": {
                "accuracy": self.input.accuracy,
                "precision": self.input.precision,
                "recall": self.input.recall,
                "f1": self.input.f1,
                "n": self.input.n,
            },
            "tolerance": self.tolerance,
            "consistent": self.consistent,
            "matches": [
                {"tp": m.tp, "fp": m.fp, "fn": m.fn, "tn": m.tn, "residual": m.residual}
                for m in self.matches
            ],
            "best_fit": {
                "tp": self.best_fit.tp,
                "fp": self.best_fit.fp,
                "fn": self.best_fit.fn,
                "tn": self.best_fit.tn,
                "residual": self.best_fit.residual,
            },
        }

    def summary_line(self) -> str:
        b = self.best_fit
        if self.consistent:
            shapes = ", ".join(str(m.as_tuple()) for m in self.matches[:4])
            extra = "" if len(self.matches) <= 4 else f" (+{len(self.matches) - 4} more)"
            return (
                f"{self.input.name}: consistent; matrices (tp,fp,fn,tn): {shapes}{extra}; "
                f"positives {self.matches[0].positives}"
            )
        return (
            f"{self.input.name}: INCONSISTENT within {self.tolerance:g}; "
            f"best fit {b.as_tuple()} residual {b.residual:.2e}"
        )


def _recomputed(tp: int, fp: int, fn: int, tn: int) -> tuple[float, float, float, float]:
    n = tp + fp + fn + tn
    acc = (tp + tn) / n
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return acc, prec, rec, f1


def _residual(row: ReportedRow, tp: int, fp: int, fn: int, tn: int) -> float:
    acc, prec, rec, f1 = _recomputed(tp, fp, fn, tn)
    return max(
        abs(acc - row.accuracy),
        abs(prec - row.precision),
        abs(rec - row.recall),
        abs(f1 - row.f1),
    )


def _int_range(lo: float, hi: float, floor: int, ceil_: int) -> range:
    a = max(floor, math.ceil(lo - _EPS))
    b = min(ceil_, math.floor(hi + _EPS))
    return range(a, b + 1)


def _candidates_within(row: ReportedRow, radius: float) -> list[CandidateMatrix]:
    """All matrices whose four recomputed metrics sit within `radius` of
    the reported values. Exact: every emitted candidate is re-verified."""
    n = row.n
    found: list[CandidateMatrix] = []
    for positives in range(n + 1):
        if positives == 0:
            tp_values: range | list[int] = [0]
        else:
            tp_values = _int_range(
                positives * (row.recall - radius), positives * (row.recall + radius), 0, positives
            )
        for tp in tp_values:
            fn = positives - tp
            # accuracy pins fp to a 2*radius*n window
            lo = tp + n - positives - n * (row.accuracy + radius)
            hi = tp + n - positives - n * (row.accuracy - radius)
            if tp > 0 and row.precision - radius > 0:
                hi = min(hi, tp / (row.precision - radius) - tp)
            if tp > 0:
                lo = max(lo, tp / (row.precision + radius) - tp)
            for fp in _int_range(lo, hi, 0, n - positives):
                tn = n - positives - fp
                residual = _residual(row, tp, fp, fn, tn)
                if residual <= radius + _EPS:
                    found.append(CandidateMatrix(tp, fp, fn, tn, residual))
    found.sort(key=lambda m: (m.residual, m.tp, m.fp, m.fn))
    return found


def audit_reported_row(
    accuracy: float,
    precision: float,
    recall: float,
    f1: float,
    n: int,
    tolerance: float = DEFAULT_TOLERANCE,
    name: str = "",
) -> AuditResult:
    """Audit one reported row; see module docstring."""
    if n < 1 or n > MAX_N:
        raise BoundExceededError(f"n must be in [1, {MAX_N}], got {n}")
    row = ReportedRow(
        name=name, accuracy=accuracy, precision=precision, recall=recall, f1=f1, n=n
    )
    matches = [m for m in _candidates_within(row, tolerance) if m.residual <= tolerance]

    if matches:
        best = matches[0]
    else:
        radius = max(tolerance, 1.0 / (2 * n))
        candidates: list[CandidateMatrix] = []
        while not candidates:
            radius *= 2
            candidates = _candidates_within(row, radius)
        best = candidates[0]

    return AuditResult(
        input=row, matches=matches, best_fit=best, consistent=bool(matches), tolerance=tolerance
    )


def audit_rows(rows: list[ReportedRow], tolerance: float = DEFAULT_TOLERANCE) -> list[AuditResult]:
    return [
        audit_reported_row(
            r.accuracy, r.precision, r.recall, r.f1, r.n, tolerance=tolerance, name=r.name
        )
        for r in rows
    ]


_ROW_KEYS = ("name", "accuracy", "precision", "recall", "f1", "n")


def load_reported_rows(path: str | Path) -> list[ReportedRow]:
    """Rows file: one flat JSON object per line with keys
    name, accuracy, precision, recall, f1, n."""
    rows: list[ReportedRow] = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", line_no=line_no) from None
        missing = [k for k in _ROW_KEYS if k not in obj]
        if missing:
            raise FormatError(f"missing keys {missing}", line_no=line_no)
        rows.append(
            ReportedRow(
                name=str(obj["name"]),
                accuracy=float(obj["accuracy"]),
                precision=float(obj["precision"]),
                recall=float(obj["recall"]),
                f1=float(obj["f1"]),
                n=int(obj["n"]),
            )
        )
    return rows


def bundled_rows_path() -> Path:
    """Path of the packaged example rows file (the published comparison
    table this tool was first pointed at)."""
    return Path(resources.files("segqc").joinpath("data/reported_rows.jsonl"))
