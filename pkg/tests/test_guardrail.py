from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import assessment_dict
from segqc.dataset import QualityLabel
from segqc.guardrail import (
    FLAG_ENSEMBLED,
    FLAG_FAIL_CLOSED,
    FLAG_INVALID_OUTPUT,
    Decision,
    decide,
    decide_case,
    decision_line,
    ensemble_decide,
)
from segqc.judge import HcrAssessment, ParseFailure, ParseFailureKind, parse_assessment


def assessment(score: int) -> HcrAssessment:
    outcome = parse_assessment(json.dumps(assessment_dict(score)))
    assert isinstance(outcome, HcrAssessment)
    return outcome


FAILURES = [
    ParseFailure(ParseFailureKind.EXTRACT, "no object"),
    ParseFailure(ParseFailureKind.SCHEMA, "missing", field="visual_features"),
    ParseFailure(ParseFailureKind.SCORE_OUT_OF_RANGE, "7"),
    ParseFailure(ParseFailureKind.CATEGORY_MISMATCH, "wrong"),
    ParseFailure(ParseFailureKind.TRANSPORT, "timeout"),
]


class TestDecide:
    @pytest.mark.parametrize("score,label", [
        (5, QualityLabel.ACCEPT),
        (4, QualityLabel.ACCEPT),
        (3, QualityLabel.REJECT),
        (2, QualityLabel.REJECT),
        (1, QualityLabel.REJECT),
    ])
    def test_score_band(self, score, label):
        decision = decide(assessment(score))
        assert decision.label is label
        assert decision.score == score
        assert not decision.flags

    @pytest.mark.parametrize("failure", FAILURES, ids=[f.kind.value for f in FAILURES])
    def test_every_failure_kind_fails_closed(self, failure):
        decision = decide(failure)
        assert decision.label is QualityLabel.REJECT
        assert decision.flags == {FLAG_INVALID_OUTPUT, FLAG_FAIL_CLOSED}
        assert decision.fail_closed
        assert decision.score is None


class TestEnsemble:
    def test_median_of_three(self):
        decision = ensemble_decide([assessment(5), assessment(4), assessment(2)])
        assert decision.label is QualityLabel.ACCEPT
        assert decision.score == 4
        assert decision.score_spread == 3
        assert FLAG_ENSEMBLED in decision.flags
        assert decision.ensemble_n == 3

    def test_lower_median_breaks_ties_toward_reject(self):
        decision = ensemble_decide([assessment(4), assessment(3)])
        assert decision.score == 3
        assert decision.label is QualityLabel.REJECT

    def test_all_failures_fall_closed(self):
        decision = ensemble_decide([FAILURES[0], FAILURES[4]])
        assert decision.label is QualityLabel.REJECT
        assert decision.flags == {FLAG_INVALID_OUTPUT, FLAG_FAIL_CLOSED}

    def test_failures_dropped_before_median(self):
        decision = ensemble_decide([FAILURES[0], assessment(5), assessment(5)])
        assert decision.label is QualityLabel.ACCEPT
        assert decision.score == 5
        assert decision.score_spread == 0

    def test_requires_at_least_two(self):
        with pytest.raises(ValueError):
            ensemble_decide([assessment(4)])

    @settings(max_examples=100, deadline=None)
    @given(scores=st.lists(st.integers(1, 5), min_size=2, max_size=7), seed=st.randoms())
    def test_permutation_invariant(self, scores, seed):
        outcomes = [assessment(s) for s in scores]
        shuffled = list(outcomes)
        seed.shuffle(shuffled)
        assert ensemble_decide(outcomes) == ensemble_decide(shuffled)

    @settings(max_examples=25, deadline=None)
    @given(score=st.integers(1, 5), k=st.integers(2, 6))
    def test_unanimous_matches_single_decision_label(self, score, k):
        single = decide(assessment(score))
        ensembled = ensemble_decide([assessment(score)] * k)
        assert ensembled.label is single.label
        assert ensembled.score == single.score

    @settings(max_examples=100, deadline=None)
    @given(
        items=st.lists(
            st.one_of(st.integers(1, 5), st.sampled_from(FAILURES)), min_size=2, max_size=6
        )
    )
    def test_never_accepts_when_all_fail(self, items):
        outcomes = [assessment(i) if isinstance(i, int) else i for i in items]
        decision = ensemble_decide(outcomes)
        if all(isinstance(o, ParseFailure) for o in outcomes):
            assert decision.label is QualityLabel.REJECT and decision.fail_closed


class TestDecideCase:
    def test_single_routes_to_decide(self):
        assert decide_case([assessment(4)]) == decide(assessment(4))

    def test_multi_routes_to_ensemble(self):
        outcomes = [assessment(4), assessment(4)]
        assert decide_case(outcomes) == ensemble_decide(outcomes)


class TestSerialization:
    def test_decision_line_round_trip(self):
        decision = ensemble_decide([assessment(5), assessment(3), assessment(4)])
        line = decision_line("case-1", "model-x", decision)
        obj = json.loads(line)
        assert obj["case_id"] == "case-1" and obj["model_id"] == "model-x"
        assert Decision.from_dict(obj["decision"]) == decision

    def test_invariant_enforced(self):
        with pytest.raises(AssertionError):
            Decision(label=QualityLabel.ACCEPT, flags=frozenset({FLAG_INVALID_OUTPUT, FLAG_FAIL_CLOSED}))
        with pytest.raises(AssertionError):
            Decision(label=QualityLabel.ACCEPT, flags=frozenset({FLAG_ENSEMBLED}), ensemble_n=1)
