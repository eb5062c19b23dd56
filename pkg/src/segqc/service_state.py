"""Shared in-memory state behind the review service endpoints."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .dataset import CaseRecord, Manifest, QualityLabel
from .guardrail import Decision, decide_case
from .imaging import BinaryMask, OverlayStyle, RasterImage, render_overlay
from .judge import JudgeTranscript
from .labelstore import LabelStore


@dataclass
class ServiceState:
    manifest: Manifest
    assets_dir: Path
    labels: LabelStore
    transcripts: list[JudgeTranscript] = field(default_factory=list)
    overlay_style: OverlayStyle = OverlayStyle()
    _by_id: dict[str, CaseRecord] = field(init=False)
    _transcripts_by_case: dict[str, list[JudgeTranscript]] = field(init=False)
    _overlay_cache: dict[str, bytes] = field(init=False, default_factory=dict)

    def __post_init__(self):
        self._by_id = self.manifest.by_id()
        self._transcripts_by_case = {}
        for t in sorted(self.transcripts, key=lambda t: (t.case_id, t.sample)):
            self._transcripts_by_case.setdefault(t.case_id, []).append(t)

    @property
    def known_groups(self) -> set[str]:
        return {case.group for case in self.manifest}

    def case(self, case_id: str) -> CaseRecord | None:
        return self._by_id.get(case_id)

    def transcripts_for(self, case_id: str) -> list[JudgeTranscript]:
        return self._transcripts_by_case.get(case_id, [])

    def decision_for(self, case_id: str) -> Decision | None:
        """Derived live from the transcript outcomes via the guardrail."""
        transcripts = self.transcripts_for(case_id)
        if not transcripts:
            return None
        return decide_case([t.outcome for t in transcripts])

    def effective_labels(self) -> dict[str, QualityLabel]:
        """Latest clinician event per case; manifest ground truth fills in
        for cases never relabeled."""
        labels: dict[str, QualityLabel] = {
            case.id: case.gt_label for case in self.manifest if case.gt_label is not None
        }
        labels.update(self.labels.effective_labels())
        return labels

    def scored_pairs(
        self,
    ) -> tuple[list[tuple[str, Decision]], list[tuple[str, QualityLabel]]]:
        """Cases having both a decision and an effective label."""
        effective = self.effective_labels()
        decisions: list[tuple[str, Decision]] = []
        gt: list[tuple[str, QualityLabel]] = []
        for case in self.manifest:
            if case.id not in effective:
                continue
            decision = self.decision_for(case.id)
            if decision is None:
                continue
            decisions.append((case.id, decision))
            gt.append((case.id, effective[case.id]))
        return decisions, gt

    def overlay_png(self, case_id: str) -> bytes:
        """Rendered on demand, cached per case."""
        if case_id not in self._overlay_cache:
            case = self._by_id[case_id]
            image = RasterImage.load(self.assets_dir / case.image_ref)
            mask = BinaryMask.load(self.assets_dir / case.mask_ref)
            self._overlay_cache[case_id] = render_overlay(image, mask, self.overlay_style)
        return self._overlay_cache[case_id]
