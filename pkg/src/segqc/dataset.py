"""Case manifest data model, ground-truth label semantics, and deterministic
train/test splitting.

A manifest is a UTF-8 JSONL file: one flat object per line with exactly the
keys id, group, modality, target, image_ref, mask_ref, expert_score,
gt_label, split (the last three nullable). The line format is version 1;
`Manifest.version` tracks the in-memory schema and is not written to disk.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterator

from .errors import (
    DuplicateIdError,
    EmptyManifestError,
    FormatError,
    ScoreRangeError,
)


class QualityLabel(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class Modality(str, Enum):
    CT = "CT"
    MR = "MR"
    PET_CT = "PET-CT"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


#: Usability scores 4 and 5 are clinically acceptable; 1-3 require rework.
ACCEPT_THRESHOLD = 4


def score_to_label(score: int) -> QualityLabel:
    """Map a 1-5 usability score to the binary accept/reject label."""
    if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 5:
        raise ScoreRangeError(score)
    return QualityLabel.ACCEPT if score >= ACCEPT_THRESHOLD else QualityLabel.REJECT


_MANIFEST_KEYS = (
    "id",
    "group",
    "modality",
    "target",
    "image_ref",
    "mask_ref",
    "expert_score",
    "gt_label",
    "split",
)


@dataclass(frozen=True)
class CaseRecord:
    """One 2D case: image/mask file refs plus clinical metadata and labels."""

    id: str
    group: str
    modality: Modality
    target: str
    image_ref: str
    mask_ref: str
    expert_score: int | None = None
    gt_label: QualityLabel | None = None
    split: Split | None = None

    def __post_init__(self):
        if self.expert_score is not None:
            if (
                not isinstance(self.expert_score, int)
                or isinstance(self.expert_score, bool)
                or not 1 <= self.expert_score <= 5
            ):
                raise ScoreRangeError(self.expert_score)
            if self.gt_label is not None and self.gt_label != score_to_label(self.expert_score):
                raise FormatError(
                    f"case {self.id!r}: gt_label {self.gt_label.value!r} contradicts "
                    f"expert_score {self.expert_score}"
                )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "group": self.group,
            "modality": self.modality.value,
            "target": self.target,
            "image_ref": self.image_ref,
            "mask_ref": self.mask_ref,
            "expert_score": self.expert_score,
            "gt_label": self.gt_label.value if self.gt_label else None,
            "split": self.split.value if self.split else None,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CaseRecord":
        unknown = set(obj) - set(_MANIFEST_KEYS)
        if unknown:
            raise FormatError(f"unknown keys {sorted(unknown)}")
        missing = {k for k in _MANIFEST_KEYS[:6] if not obj.get(k)}
        if missing:
            raise FormatError(f"missing required keys {sorted(missing)}")
        try:
            modality = Modality(obj["modality"])
        except ValueError:
            raise FormatError(f"unknown modality {obj['modality']!r}") from None
        gt = obj.get("gt_label")
        split = obj.get("split")
        try:
            return cls(
                id=str(obj["id"]),
                group=str(obj["group"]),
                modality=modality,
                target=str(obj["target"]),
                image_ref=str(obj["image_ref"]),
                mask_ref=str(obj["mask_ref"]),
                expert_score=obj.get("expert_score"),
                gt_label=QualityLabel(gt) if gt is not None else None,
                split=Split(split) if split is not None else None,
            )
        except ValueError as exc:
            raise FormatError(str(exc)) from None


@dataclass
class Manifest:
    version: int = 1
    cases: list[CaseRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> Iterator[CaseRecord]:
        return iter(self.cases)

    def by_id(self) -> dict[str, CaseRecord]:
        return {c.id: c for c in self.cases}

    def validate_unique_ids(self) -> None:
        seen: set[str] = set()
        for case in self.cases:
            if case.id in seen:
                raise DuplicateIdError(case.id)
            seen.add(case.id)


def load_manifest(path: str | Path) -> Manifest:
    """Read a JSONL manifest, preserving file order and validating invariants."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc}") from exc
    cases: list[CaseRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", line_no=line_no) from None
        if not isinstance(obj, dict):
            raise FormatError("record is not an object", line_no=line_no)
        try:
            case = CaseRecord.from_dict(obj)
        except ScoreRangeError:
            raise
        except FormatError as exc:
            raise FormatError(str(exc), line_no=line_no) from None
        if case.id in seen:
            raise DuplicateIdError(case.id)
        seen.add(case.id)
        cases.append(case)
    return Manifest(version=1, cases=cases)


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(case.to_dict(), separators=(", ", ": ")) for case in manifest.cases]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _group_rng(seed: int, group: str) -> random.Random:
    """Process-independent RNG per (seed, group); avoids salted str hashing."""
    digest = hashlib.sha256(f"{seed}:{group}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def split_dataset(manifest: Manifest, train_ratio: float, seed: int) -> Manifest:
    """Assign train/test splits: global train count floor(N * ratio),
    apportioned across groups by largest remainder, shuffled per group."""
    if not 0 < train_ratio < 1:
        raise ValueError(f"train_ratio must be in (0, 1), got {train_ratio}")
    if len(manifest) == 0:
        raise EmptyManifestError("cannot split an empty manifest")

    groups: dict[str, list[int]] = {}
    for idx, case in enumerate(manifest.cases):
        groups.setdefault(case.group, []).append(idx)

    total_train = math.floor(len(manifest) * train_ratio)
    quotas = {g: len(ix) * train_ratio for g, ix in groups.items()}
    counts = {g: math.floor(q) for g, q in quotas.items()}
    leftover = total_train - sum(counts.values())
    # Ties broken by group name so the apportionment is order-independent.
    by_remainder = sorted(groups, key=lambda g: (-(quotas[g] - counts[g]), g))
    for g in by_remainder[:leftover]:
        counts[g] += 1

    assignment: dict[int, Split] = {}
    for g, indices in groups.items():
        order = list(indices)
        _group_rng(seed, g).shuffle(order)
        for rank, idx in enumerate(order):
            assignment[idx] = Split.TRAIN if rank < counts[g] else Split.TEST

    cases = [replace(case, split=assignment[idx]) for idx, case in enumerate(manifest.cases)]
    return Manifest(version=manifest.version, cases=cases)


@dataclass(frozen=True)
class GroupRow:
    group: str
    modality: Modality
    target: str
    count: int


@dataclass(frozen=True)
class GroupSummary:
    rows: list[GroupRow]
    total: int


def summarize_groups(manifest: Manifest) -> GroupSummary:
    """Per-group (modality, target, count) table plus the overall total.

    Modality and target are taken from the first case seen in each group;
    rows are sorted by group name.
    """
    first: dict[str, CaseRecord] = {}
    counts: dict[str, int] = {}
    for case in manifest.cases:
        first.setdefault(case.group, case)
        counts[case.group] = counts.get(case.group, 0) + 1
    rows = [
        GroupRow(group=g, modality=first[g].modality, target=first[g].target, count=counts[g])
        for g in sorted(counts)
    ]
    return GroupSummary(rows=rows, total=len(manifest))


#: Group composition of the curated reference collection used for
#: desk-scale shape checks (no pixel data, refs are placeholders).
REFERENCE_GROUPS = (
    ("brain-mr", Modality.MR, "Brain Lesion", 48),
    ("breast-mr", Modality.MR, "Breast Lesion", 90),
    ("liver-ct", Modality.CT, "Liver", 53),
    ("lung-ct", Modality.CT, "Lung Nodule", 172),
    ("lung-fdg-pet-ct", Modality.PET_CT, "Lung Tumor", 35),
    ("prostate-mr", Modality.MR, "Prostate", 81),
)


def reference_manifest() -> Manifest:
    """Build the 479-case reference-shaped manifest."""
    cases = []
    for group, modality, target, count in REFERENCE_GROUPS:
        for i in range(count):
            cid = f"{group}-{i:04d}"
            cases.append(
                CaseRecord(
                    id=cid,
                    group=group,
                    modality=modality,
                    target=target,
                    image_ref=f"images/{cid}.png",
                    mask_ref=f"masks/{cid}.png",
                )
            )
    return Manifest(cases=cases)
