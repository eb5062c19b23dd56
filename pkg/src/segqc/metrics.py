"""Confusion matrices and derived metrics with an explicit positive class.

The positive class is a required parameter everywhere: published tables
in this domain are frequently ambiguous about which label precision and
recall count, and hiding the convention makes numbers unreproducible.
Zero divisions report the metric as 0 plus a flag, never a silent
omission.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .dataset import Manifest, QualityLabel
from .errors import IdMismatchError, UnknownCaseError
from .guardrail import Decision


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    positive_class: QualityLabel

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricValues:
    accuracy: float
    precision: float
    recall: float
    f1: float
    count: int
    zero_division_flags: frozenset[str] = frozenset()

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "count": self.count,
            "zero_division_flags": sorted(self.zero_division_flags),
        }


@dataclass(frozen=True)
class MetricsReport:
    overall: MetricValues
    per_group: dict[str, MetricValues]
    n: int
    positive_class: QualityLabel

    @property
    def zero_division_flags(self) -> frozenset[str]:
        return self.overall.zero_division_flags


def _derive(cm: ConfusionMatrix) -> MetricValues:
    flags = set()
    n = cm.n
    accuracy = (cm.tp + cm.tn) / n
    if cm.tp + cm.fp:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision = 0.0
        flags.add("precision")
    if cm.tp + cm.fn:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall = 0.0
        flags.add("recall")
    if precision + recall:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        flags.add("f1")
    return MetricValues(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        count=n,
        zero_division_flags=frozenset(flags),
    )


def _count(
    pairs: list[tuple[QualityLabel, QualityLabel]], positive_class: QualityLabel
) -> ConfusionMatrix:
    tp = fp = fn = tn = 0
    for predicted, actual in pairs:
        if predicted == positive_class:
            if actual == positive_class:
                tp += 1
            else:
                fp += 1
        else:
            if actual == positive_class:
                fn += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn, positive_class=positive_class)


def _paired(
    decisions: list[tuple[str, Decision]], gt: list[tuple[str, QualityLabel]]
) -> dict[str, tuple[QualityLabel, QualityLabel]]:
    predicted = {cid: d.label for cid, d in decisions}
    actual = dict(gt)
    if len(predicted) != len(decisions) or len(actual) != len(gt):
        raise IdMismatchError("duplicate case ids")
    if set(predicted) != set(actual):
        missing = set(predicted) ^ set(actual)
        raise IdMismatchError(f"decision/label id sets differ (e.g. {sorted(missing)[:5]})")
    if not predicted:
        raise IdMismatchError("no cases to score")
    return {cid: (predicted[cid], actual[cid]) for cid in predicted}


def compute_metrics(
    decisions: list[tuple[str, Decision]],
    gt: list[tuple[str, QualityLabel]],
    positive_class: QualityLabel,
) -> tuple[ConfusionMatrix, MetricsReport]:
    """Accuracy/precision/recall/F1 at full float precision (rendering
    rounds to 4 decimals)."""
    pairs = list(_paired(decisions, gt).values())
    cm = _count(pairs, positive_class)
    overall = _derive(cm)
    report = MetricsReport(overall=overall, per_group={}, n=cm.n, positive_class=positive_class)
    return cm, report


def per_group_breakdown(
    decisions: list[tuple[str, Decision]],
    gt: list[tuple[str, QualityLabel]],
    manifest: Manifest,
    positive_class: QualityLabel,
) -> MetricsReport:
    """Overall metrics plus group-restricted rows (groups that cannot
    compute a metric are flagged, not omitted)."""
    paired = _paired(decisions, gt)
    group_of = {case.id: case.group for case in manifest}
    by_group: dict[str, list[tuple[QualityLabel, QualityLabel]]] = {}
    for cid, pair in paired.items():
        if cid not in group_of:
            raise UnknownCaseError(cid)
        by_group.setdefault(group_of[cid], []).append(pair)

    overall = _derive(_count(list(paired.values()), positive_class))
    per_group = {
        group: _derive(_count(pairs, positive_class))
        for group, pairs in sorted(by_group.items())
    }
    return MetricsReport(
        overall=overall, per_group=per_group, n=overall.count, positive_class=positive_class
    )


def round4(value: float) -> str:
    """4-decimal rendering, half away from zero."""
    return str(Decimal(repr(value)).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


def render_report(report: MetricsReport, audits: list | None = None) -> tuple[dict, str]:
    """(machine-readable document, aligned plain-text table).

    Deterministic: groups alphabetical, audits in input order."""
    doc = {
        "positive_class": report.positive_class.value,
        "n": report.n,
        "overall": report.overall.as_dict(),
        "per_group": {g: v.as_dict() for g, v in sorted(report.per_group.items())},
    }
    if audits:
        doc["audits"] = [a.to_dict() for a in audits]

    headers = ("scope", "n", "accuracy", "precision", "recall", "f1", "flags")
    rows = [
        (
            "overall",
            str(report.overall.count),
            round4(report.overall.accuracy),
            round4(report.overall.precision),
            round4(report.overall.recall),
            round4(report.overall.f1),
            ",".join(sorted(report.overall.zero_division_flags)) or "-",
        )
    ]
    for group, values in sorted(report.per_group.items()):
        rows.append(
            (
                group,
                str(values.count),
                round4(values.accuracy),
                round4(values.precision),
                round4(values.recall),
                round4(values.f1),
                ",".join(sorted(values.zero_division_flags)) or "-",
            )
        )
    widths = [max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(len(headers))]
    lines = [
        f"positive class: {report.positive_class.value}",
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(r[i].ljust(widths[i]) for i in range(len(headers))) for r in rows]

    if audits:
        lines.append("")
        lines.append("reported-row audit:")
        for audit in audits:
            lines.append("  " + audit.summary_line())
    return doc, "\n".join(lines) + "\n"
