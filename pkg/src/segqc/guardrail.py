"""Fail-closed accept/reject decisions from judge outcomes.

Any outcome that is not a valid assessment rejects: a silent accept on
garbage output is the worst failure mode for a safety gate. Even-sized
ensembles break ties with the lower median for the same reason.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .dataset import QualityLabel, score_to_label
from .judge import HcrAssessment, JudgeOutcome

FLAG_INVALID_OUTPUT = "invalid_output"
FLAG_FAIL_CLOSED = "fail_closed"
FLAG_ENSEMBLED = "ensembled"


@dataclass(frozen=True)
class Decision:
    label: QualityLabel
    score: int | None = None
    flags: frozenset[str] = frozenset()
    ensemble_n: int | None = None
    score_spread: int | None = None

    def __post_init__(self):
        if FLAG_INVALID_OUTPUT in self.flags:
            assert FLAG_FAIL_CLOSED in self.flags and self.label is QualityLabel.REJECT
        if FLAG_ENSEMBLED in self.flags:
            assert self.ensemble_n is not None and self.ensemble_n >= 2

    @property
    def fail_closed(self) -> bool:
        return FLAG_FAIL_CLOSED in self.flags

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "score": self.score,
            "flags": sorted(self.flags),
            "ensemble_n": self.ensemble_n,
            "score_spread": self.score_spread,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Decision":
        return cls(
            label=QualityLabel(obj["label"]),
            score=obj.get("score"),
            flags=frozenset(obj.get("flags", ())),
            ensemble_n=obj.get("ensemble_n"),
            score_spread=obj.get("score_spread"),
        )


_REJECT_CLOSED = frozenset({FLAG_INVALID_OUTPUT, FLAG_FAIL_CLOSED})


def decide(outcome: JudgeOutcome) -> Decision:
    """Single-sample decision; parse failures reject with the closed flags."""
    if isinstance(outcome, HcrAssessment):
        score = outcome.clinical_synthesis.score
        return Decision(label=score_to_label(score), score=score)
    return Decision(label=QualityLabel.REJECT, flags=_REJECT_CLOSED)


def ensemble_decide(outcomes: list[JudgeOutcome]) -> Decision:
    """Decision over k >= 2 samples: failures are dropped, the lower median
    of surviving scores decides; all-failed falls closed."""
    if len(outcomes) < 2:
        raise ValueError("ensemble requires at least 2 outcomes")
    scores = sorted(
        o.clinical_synthesis.score for o in outcomes if isinstance(o, HcrAssessment)
    )
    if not scores:
        return Decision(
            label=QualityLabel.REJECT, flags=_REJECT_CLOSED, ensemble_n=len(outcomes)
        )
    score = scores[(len(scores) - 1) // 2]
    return Decision(
        label=score_to_label(score),
        score=score,
        flags=frozenset({FLAG_ENSEMBLED}),
        ensemble_n=len(outcomes),
        score_spread=scores[-1] - scores[0],
    )


def decide_case(outcomes: list[JudgeOutcome]) -> Decision:
    """Route one case's outcomes: a single sample decides directly, two or
    more go through the ensemble."""
    if len(outcomes) == 1:
        return decide(outcomes[0])
    return ensemble_decide(outcomes)


def decision_line(case_id: str, model_id: str, decision: Decision) -> str:
    return json.dumps(
        {"case_id": case_id, "model_id": model_id, "decision": decision.to_dict()},
        ensure_ascii=False,
    )
