"""Builds the structured four-stage assessment prompt and owns the output
schema and the 1-5 usability rubric.

The template is versioned; the version participates in the prompt hash so
cached judgments are invalidated whenever the wording changes. Computed
pixel features are NOT injected by default - the judge is expected to
reason from the image alone - but callers may opt in.
"""

from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass

from .dataset import Modality
from .errors import EmptyImageError
from .imaging import VisualFeatures

PROMPT_VERSION = "hcr-v1"

STAGE_HEADERS = (
    "Stage 1 - Knowledge Recall",
    "Stage 2 - Visual Feature Analysis",
    "Stage 3 - Anatomical Inference",
    "Stage 4 - Clinical Synthesis",
)

#: Output contract: top-level field -> nested text fields (None = plain text).
SCHEMA_FIELDS: dict[str, tuple[str, ...] | None] = {
    "knowledge_recall": None,
    "visual_features": ("contour_continuity", "edge_clarity", "texture_homogeneity"),
    "anatomical_inference": ("plausibility", "under_segmentation", "spillage"),
    "clinical_synthesis": ("summary", "score", "category"),
}

RUBRIC_CATEGORIES = {
    1: "unusable",
    2: "major revision required",
    3: "moderate revision required",
    4: "acceptable with minor edits",
    5: "clinically ready",
}


@dataclass(frozen=True)
class ClinicalContext:
    target: str
    modality: Modality
    group: str = ""
    extra_notes: str | None = None

    def __post_init__(self):
        if not self.target.strip():
            raise ValueError("target must be nonempty")


@dataclass(frozen=True)
class Rubric:
    entries: dict[int, str]

    def __post_init__(self):
        if sorted(self.entries) != [1, 2, 3, 4, 5]:
            raise ValueError("rubric must map exactly the scores 1-5")
        if len(set(self.entries.values())) != 5:
            raise ValueError("rubric categories must be distinct")

    def category(self, score: int) -> str:
        return self.entries[score]


def default_rubric() -> Rubric:
    return Rubric(entries=dict(RUBRIC_CATEGORIES))


@dataclass(frozen=True)
class HcrPrompt:
    system_text: str
    user_text: str
    image_media_type: str
    image_base64: str
    prompt_hash: str


_SYSTEM_TEMPLATE = (
    "You are a senior radiologist acting as a segmentation quality reviewer. "
    "You evaluate AI-generated contours on 2D medical images for clinical "
    "usability. You are rigorous, conservative, and you justify every "
    "observation before scoring."
)


def _rubric_lines(rubric: Rubric) -> str:
    return "\n".join(f"  {s}: {rubric.category(s)}" for s in sorted(rubric.entries))


def _schema_block() -> str:
    return (
        "{\n"
        '  "knowledge_recall": "<text>",\n'
        '  "visual_features": {\n'
        '    "contour_continuity": "<text>",\n'
        '    "edge_clarity": "<text>",\n'
        '    "texture_homogeneity": "<text>"\n'
        "  },\n"
        '  "anatomical_inference": {\n'
        '    "plausibility": "<text>",\n'
        '    "under_segmentation": "<text>",\n'
        '    "spillage": "<text>"\n'
        "  },\n"
        '  "clinical_synthesis": {\n'
        '    "summary": "<text>",\n'
        '    "score": <integer 1-5>,\n'
        '    "category": "<category matching the score>"\n'
        "  }\n"
        "}"
    )


def _features_block(features: VisualFeatures) -> str:
    lines = [
        "Computed measurements (advisory; verify against the image):",
        f"  connected regions: {features.topology.component_count}",
        f"  boundary edge strength [0-1]: {features.boundary_edge_strength:.3f}",
    ]
    if features.interior_cv is not None:
        lines.append(f"  interior intensity CV: {features.interior_cv:.3f}")
    if features.overlap is not None:
        lines.append(f"  dice vs reference: {features.overlap.dice:.3f}")
    return "\n".join(lines)


def build_hcr_prompt(
    context: ClinicalContext,
    image_png: bytes,
    features: VisualFeatures | None = None,
    version: str = PROMPT_VERSION,
) -> HcrPrompt:
    """Assemble system/user text plus the inline image attachment.

    The user text walks the four stages in order and ends with the exact
    output contract; every schema field name appears verbatim."""
    if not image_png:
        raise EmptyImageError("image payload is empty")
    rubric = default_rubric()

    sections = [
        f"Task: assess the clinical usability of the overlaid segmentation of "
        f"a {context.target} on this {context.modality.value} image.",
    ]
    if context.extra_notes:
        sections.append(f"Additional context: {context.extra_notes}")
    sections += [
        f"## {STAGE_HEADERS[0]}",
        f"Before looking at the contour, state what a {context.target} typically "
        f"looks like on {context.modality.value}: expected intensities or signal "
        "characteristics, common textures, and the surrounding anatomy. Record "
        "this as knowledge_recall.",
        f"## {STAGE_HEADERS[1]}",
        "Examine the contour itself: is it continuous as a single closed loop "
        "(contour_continuity)? Are there clear pixel intensity transitions at "
        "its interface with surrounding tissue (edge_clarity)? Is the interior "
        "texture homogeneous or heterogeneous (texture_homogeneity)?",
        f"## {STAGE_HEADERS[2]}",
        "Judge anatomical plausibility against your Stage 1 knowledge "
        "(plausibility). Identify under-segmentation: areas of the target the "
        "contour misses (under_segmentation). Identify spillage: erroneous "
        "inclusion of adjacent healthy tissue or other structures (spillage).",
        f"## {STAGE_HEADERS[3]}",
        "Integrate all findings into a concise clinical summary, assign a "
        "numerical score from the predefined 1-5 scale, and give the "
        "descriptive category for that score.",
        "Score categories:",
        _rubric_lines(rubric),
    ]
    if features is not None:
        sections.append(_features_block(features))
    sections += [
        "Respond with a single JSON object exactly matching this shape, and "
        "nothing else:",
        _schema_block(),
    ]
    user_text = "\n\n".join(sections)

    digest = hashlib.sha256()
    for part in (version.encode(), _SYSTEM_TEMPLATE.encode(), user_text.encode(), image_png):
        digest.update(len(part).to_bytes(8, "big"))
        digest.update(part)
    prompt_hash = digest.hexdigest()[:16]

    return HcrPrompt(
        system_text=_SYSTEM_TEMPLATE,
        user_text=user_text,
        image_media_type="image/png",
        image_base64=base64.b64encode(image_png).decode("ascii"),
        prompt_hash=prompt_hash,
    )


def output_schema_and_rubric() -> tuple[dict, Rubric]:
    """JSON-Schema-shaped descriptor of the output contract plus the rubric."""
    rubric = default_rubric()

    def text_obj(fields: tuple[str, ...]) -> dict:
        return {
            "type": "object",
            "properties": {f: {"type": "string", "minLength": 1} for f in fields},
            "required": list(fields),
            "additionalProperties": False,
        }

    schema = {
        "type": "object",
        "properties": {
            "knowledge_recall": {"type": "string", "minLength": 1},
            "visual_features": text_obj(SCHEMA_FIELDS["visual_features"]),
            "anatomical_inference": text_obj(SCHEMA_FIELDS["anatomical_inference"]),
            "clinical_synthesis": {
                "type": "object",
                "properties": {
                    "summary": {"type": "string", "minLength": 1},
                    "score": {"type": "integer", "minimum": 1, "maximum": 5},
                    "category": {"enum": list(rubric.entries.values())},
                },
                "required": ["summary", "score", "category"],
                "additionalProperties": False,
            },
        },
        "required": list(SCHEMA_FIELDS),
        "additionalProperties": False,
    }
    return schema, rubric
