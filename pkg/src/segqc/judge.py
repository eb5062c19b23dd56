"""Judge dispatch and result handling.

Sends multimodal chat-completion requests to a configurable endpoint (or
runs a deterministic offline mock), robustly extracts the structured
assessment from whatever text comes back, and runs cached, bounded-parallel
batches. Raw model text is always persisted alongside the parsed outcome so
every judgment keeps its audit trail.
"""

from __future__ import annotations

import fcntl
import json
import os
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Union

import httpx

from .dataset import CaseRecord
from .errors import (
    AuthError,
    RequestTimeoutError,
    TransientExhaustedError,
    TransportError,
)
from .imaging import BinaryMask, RasterImage, VisualFeatures, extract_features
from .prompts import (
    PROMPT_VERSION,
    ClinicalContext,
    HcrPrompt,
    Rubric,
    build_hcr_prompt,
    default_rubric,
)

RETRY_BASE_S = 1.0
RETRY_CAP_S = 30.0

#: Timestamp used for offline mock transcripts so repeated runs are
#: byte-identical.
EPOCH_UTC = "1970-01-01T00:00:00+00:00"


@dataclass(frozen=True)
class ProviderConfig:
    endpoint_url: str
    model_id: str
    api_key_ref: str = "SEGQC_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    max_parallel: int = 4
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")


@dataclass(frozen=True)
class MockProvider:
    """Offline judge: scores from computed pixel features, no network."""

    model_id: str = "mock-hcr"
    max_parallel: int = 1
    truth_dirname: str = "truths"


@dataclass(frozen=True)
class VisualFeatureNotes:
    contour_continuity: str
    edge_clarity: str
    texture_homogeneity: str


@dataclass(frozen=True)
class AnatomicalInferenceNotes:
    plausibility: str
    under_segmentation: str
    spillage: str


@dataclass(frozen=True)
class ClinicalSynthesis:
    summary: str
    score: int
    category: str


@dataclass(frozen=True)
class HcrAssessment:
    knowledge_recall: str
    visual_features: VisualFeatureNotes
    anatomical_inference: AnatomicalInferenceNotes
    clinical_synthesis: ClinicalSynthesis

    def to_dict(self) -> dict:
        return {
            "knowledge_recall": self.knowledge_recall,
            "visual_features": {
                "contour_continuity": self.visual_features.contour_continuity,
                "edge_clarity": self.visual_features.edge_clarity,
                "texture_homogeneity": self.visual_features.texture_homogeneity,
            },
            "anatomical_inference": {
                "plausibility": self.anatomical_inference.plausibility,
                "under_segmentation": self.anatomical_inference.under_segmentation,
                "spillage": self.anatomical_inference.spillage,
            },
            "clinical_synthesis": {
                "summary": self.clinical_synthesis.summary,
                "score": self.clinical_synthesis.score,
                "category": self.clinical_synthesis.category,
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "HcrAssessment":
        return cls(
            knowledge_recall=obj["knowledge_recall"],
            visual_features=VisualFeatureNotes(**obj["visual_features"]),
            anatomical_inference=AnatomicalInferenceNotes(**obj["anatomical_inference"]),
            clinical_synthesis=ClinicalSynthesis(**obj["clinical_synthesis"]),
        )


class ParseFailureKind(str, Enum):
    EXTRACT = "extract_error"
    SCHEMA = "schema_error"
    SCORE_OUT_OF_RANGE = "score_out_of_range"
    CATEGORY_MISMATCH = "category_mismatch"
    TRANSPORT = "transport_failure"


@dataclass(frozen=True)
class ParseFailure:
    kind: ParseFailureKind
    detail: str
    field: str | None = None


JudgeOutcome = Union[HcrAssessment, ParseFailure]


@dataclass(frozen=True)
class JudgeTranscript:
    case_id: str
    model_id: str
    prompt_hash: str
    raw_text: str
    outcome: JudgeOutcome
    attempts: int
    latency_ms: float
    timestamp: str
    sample: int = 0

    def to_dict(self) -> dict:
        if isinstance(self.outcome, HcrAssessment):
            outcome = {"kind": "assessment", "assessment": self.outcome.to_dict()}
        else:
            outcome = {
                "kind": "failure",
                "failure": {
                    "kind": self.outcome.kind.value,
                    "detail": self.outcome.detail,
                    "field": self.outcome.field,
                },
            }
        return {
            "case_id": self.case_id,
            "model_id": self.model_id,
            "prompt_hash": self.prompt_hash,
            "sample": self.sample,
            "raw_text": self.raw_text,
            "outcome": outcome,
            "attempts": self.attempts,
            "latency_ms": self.latency_ms,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "JudgeTranscript":
        raw_outcome = obj["outcome"]
        outcome: JudgeOutcome
        if raw_outcome["kind"] == "assessment":
            outcome = HcrAssessment.from_dict(raw_outcome["assessment"])
        else:
            f = raw_outcome["failure"]
            outcome = ParseFailure(
                kind=ParseFailureKind(f["kind"]), detail=f["detail"], field=f.get("field")
            )
        return cls(
            case_id=obj["case_id"],
            model_id=obj["model_id"],
            prompt_hash=obj["prompt_hash"],
            raw_text=obj["raw_text"],
            outcome=outcome,
            attempts=obj["attempts"],
            latency_ms=obj["latency_ms"],
            timestamp=obj["timestamp"],
            sample=obj.get("sample", 0),
        )


# --------------------------------------------------------------------------
# Extraction and validation


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n(.*?)```", re.DOTALL)


def _balanced_object_spans(text: str, limit: int = 64) -> list[str]:
    """Top-level {...} spans in order, tracking JSON string/escape state."""
    spans: list[str] = []
    depth = 0
    start = -1
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if depth > 0 and in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"' and depth > 0:
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                spans.append(text[start : i + 1])
                if len(spans) >= limit:
                    break
    return spans


def _extract_object(raw_text: str) -> dict | None:
    """Three-stage extraction: whole text, fenced blocks, balanced spans."""
    try:
        obj = json.loads(raw_text)
        if isinstance(obj, dict):
            return obj
    except (json.JSONDecodeError, RecursionError):
        pass
    for block in _FENCE_RE.findall(raw_text):
        try:
            obj = json.loads(block)
            if isinstance(obj, dict):
                return obj
        except (json.JSONDecodeError, RecursionError):
            continue
    for span in _balanced_object_spans(raw_text):
        try:
            obj = json.loads(span)
            if isinstance(obj, dict):
                return obj
        except (json.JSONDecodeError, RecursionError):
            continue
    return None


def _nonempty_text(obj: dict, section: str, key: str) -> str | ParseFailure:
    value = obj.get(key)
    label = f"{section}.{key}"
    if not isinstance(value, str) or not value.strip():
        return ParseFailure(ParseFailureKind.SCHEMA, f"{label} must be nonempty text", field=label)
    return value


def parse_assessment(raw_text: str, rubric: Rubric | None = None) -> JudgeOutcome:
    """Extract and validate a structured assessment from model output.

    Never raises on arbitrary input; failures come back as values naming
    the stage that rejected the text."""
    rubric = rubric or default_rubric()
    obj = _extract_object(raw_text)
    if obj is None:
        return ParseFailure(ParseFailureKind.EXTRACT, "no parseable top-level object found")

    kr = obj.get("knowledge_recall")
    if not isinstance(kr, str) or not kr.strip():
        return ParseFailure(
            ParseFailureKind.SCHEMA, "knowledge_recall must be nonempty text", field="knowledge_recall"
        )

    sections: dict[str, dict] = {}
    for section, keys in (
        ("visual_features", ("contour_continuity", "edge_clarity", "texture_homogeneity")),
        ("anatomical_inference", ("plausibility", "under_segmentation", "spillage")),
    ):
        body = obj.get(section)
        if not isinstance(body, dict):
            return ParseFailure(
                ParseFailureKind.SCHEMA, f"{section} must be an object", field=section
            )
        texts = {}
        for key in keys:
            value = _nonempty_text(body, section, key)
            if isinstance(value, ParseFailure):
                return value
            texts[key] = value
        sections[section] = texts

    synthesis = obj.get("clinical_synthesis")
    if not isinstance(synthesis, dict):
        return ParseFailure(
            ParseFailureKind.SCHEMA, "clinical_synthesis must be an object", field="clinical_synthesis"
        )
    summary = _nonempty_text(synthesis, "clinical_synthesis", "summary")
    if isinstance(summary, ParseFailure):
        return summary
    score = synthesis.get("score")
    if isinstance(score, bool) or not isinstance(score, int):
        return ParseFailure(
            ParseFailureKind.SCHEMA,
            f"score must be an integer, got {score!r}",
            field="clinical_synthesis.score",
        )
    if not 1 <= score <= 5:
        return ParseFailure(
            ParseFailureKind.SCORE_OUT_OF_RANGE,
            f"score {score} outside 1-5",
            field="clinical_synthesis.score",
        )
    category = synthesis.get("category")
    if not isinstance(category, str) or not category.strip():
        return ParseFailure(
            ParseFailureKind.SCHEMA, "category must be nonempty text", field="clinical_synthesis.category"
        )
    expected = rubric.category(score)
    if category.strip().casefold() != expected.casefold():
        return ParseFailure(
            ParseFailureKind.CATEGORY_MISMATCH,
            f"category {category!r} does not match {expected!r} for score {score}",
            field="clinical_synthesis.category",
        )

    return HcrAssessment(
        knowledge_recall=kr,
        visual_features=VisualFeatureNotes(**sections["visual_features"]),
        anatomical_inference=AnatomicalInferenceNotes(**sections["anatomical_inference"]),
        clinical_synthesis=ClinicalSynthesis(summary=summary, score=score, category=expected),
    )


# --------------------------------------------------------------------------
# Deterministic offline judge

EDGE_STRENGTH_FLOOR = 0.15
INTERIOR_CV_CEILING = 0.8
DICE_GOOD = 0.90
DICE_POOR = 0.70
COVERAGE_ERROR_CEILING = 0.25


def mock_judge(features: VisualFeatures, rubric: Rubric | None = None) -> HcrAssessment:
    """Score a segmentation from its computed features.

    Starts at 5 and subtracts one point per tripped rule (two for dice
    below the poor tier), flooring at 1. Texts are templated from the
    same rules so the narrative matches the score."""
    rubric = rubric or default_rubric()
    topo = features.topology
    penalties: list[str] = []

    if topo.component_count != 1:
        penalties.append(f"contour is not a single region ({topo.component_count} found)")
        continuity = f"{topo.component_count} disjoint regions; the contour is not one closed loop"
    else:
        holes = topo.holes_per_component[0]
        continuity = "single closed region" + (f" containing {holes} hole(s)" if holes else "")

    edge = features.boundary_edge_strength
    if edge < EDGE_STRENGTH_FLOOR:
        penalties.append(f"boundary lacks clear intensity transitions (strength {edge:.2f})")
        edge_text = f"weak intensity transition at the interface (strength {edge:.2f})"
    else:
        edge_text = f"clear intensity transition at the interface (strength {edge:.2f})"

    cv = features.interior_cv
    if cv is None:
        texture = "no interior to characterize"
    elif cv > INTERIOR_CV_CEILING:
        penalties.append(f"interior texture is heterogeneous (CV {cv:.2f})")
        texture = f"heterogeneous interior texture (CV {cv:.2f})"
    else:
        texture = f"homogeneous interior texture (CV {cv:.2f})"

    overlap = features.overlap
    if overlap is None:
        plausibility = "no reference available; judged on appearance alone"
        under_text = "not measured"
        spill_text = "not measured"
    else:
        if overlap.dice < DICE_GOOD:
            penalties.append(f"agreement with the expected region is reduced (dice {overlap.dice:.2f})")
        if overlap.dice < DICE_POOR:
            penalties.append(f"agreement with the expected region is poor (dice {overlap.dice:.2f})")
        plausibility = f"region agreement dice {overlap.dice:.2f}"
        if overlap.under_seg_fraction > COVERAGE_ERROR_CEILING:
            penalties.append(
                f"substantial target area is missed ({overlap.under_seg_fraction:.0%})"
            )
            under_text = f"misses {overlap.under_seg_fraction:.0%} of the target"
        else:
            under_text = f"covers the target ({overlap.under_seg_fraction:.0%} missed)"
        if overlap.spill_fraction > COVERAGE_ERROR_CEILING:
            penalties.append(
                f"substantial spillage into surrounding tissue ({overlap.spill_fraction:.0%})"
            )
            spill_text = f"{overlap.spill_fraction:.0%} of the contour lies outside the target"
        else:
            spill_text = f"minimal spillage ({overlap.spill_fraction:.0%} outside the target)"

    score = max(1, 5 - len(penalties))
    if penalties:
        summary = "Concerns: " + "; ".join(penalties) + "."
    else:
        summary = "No defects detected; the contour tracks the target cleanly."

    return HcrAssessment(
        knowledge_recall=(
            "A well-segmented target appears as one cohesive region with a "
            "crisp boundary against surrounding tissue and a consistent interior."
        ),
        visual_features=VisualFeatureNotes(
            contour_continuity=continuity, edge_clarity=edge_text, texture_homogeneity=texture
        ),
        anatomical_inference=AnatomicalInferenceNotes(
            plausibility=plausibility, under_segmentation=under_text, spillage=spill_text
        ),
        clinical_synthesis=ClinicalSynthesis(
            summary=summary, score=score, category=rubric.category(score)
        ),
    )


# --------------------------------------------------------------------------
# Wire client


def _auth_headers(config: ProviderConfig) -> dict[str, str]:
    key = os.environ.get(config.api_key_ref, "")
    return {"Authorization": f"Bearer {key}"} if key else {}


def _request_body(prompt: HcrPrompt, config: ProviderConfig) -> dict:
    return {
        "model": config.model_id,
        "temperature": config.temperature,
        "messages": [
            {"role": "system", "content": prompt.system_text},
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": prompt.user_text},
                    {
                        "type": "image_url",
                        "image_url": {
                            "url": f"data:{prompt.image_media_type};base64,{prompt.image_base64}"
                        },
                    },
                ],
            },
        ],
    }


def _send_with_retries(
    prompt: HcrPrompt,
    config: ProviderConfig,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[str, int]:
    """POST with exponential backoff and full jitter on timeout/429/5xx.

    Returns (assistant text, attempts). 401/403 fail immediately."""
    last: Exception | None = None
    with httpx.Client(timeout=config.timeout, transport=transport) as client:
        for attempt in range(config.max_retries + 1):
            if attempt:
                sleep(random.uniform(0.0, min(RETRY_CAP_S, RETRY_BASE_S * 2 ** (attempt - 1))))
            try:
                response = client.post(
                    config.endpoint_url,
                    json=_request_body(prompt, config),
                    headers=_auth_headers(config),
                )
            except httpx.TimeoutException as exc:
                last = RequestTimeoutError(str(exc))
                continue
            except httpx.HTTPError as exc:
                raise TransportError(str(exc)) from exc
            if response.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials (HTTP {response.status_code})")
            if response.status_code == 429 or response.status_code >= 500:
                last = TransportError(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                return response.json()["choices"][0]["message"]["content"], attempt + 1
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise TransportError(f"malformed response body: {exc}") from exc
    assert last is not None
    if config.max_retries == 0:
        raise last
    raise TransientExhaustedError(config.max_retries + 1, last)


def send_judge_request(
    prompt: HcrPrompt,
    config: ProviderConfig,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """One multimodal judging request; returns the assistant text verbatim."""
    text, _ = _send_with_retries(prompt, config, transport=transport, sleep=sleep)
    return text


# --------------------------------------------------------------------------
# Batch runner with an append-only transcript cache


class TranscriptStore:
    """Append-only JSONL transcript cache under <cache_dir>/<model_id>/.

    Appends are single O_APPEND writes serialized by an advisory file
    lock, so concurrent writers cannot interleave partial lines."""

    def __init__(self, cache_dir: str | Path, model_id: str):
        self.path = Path(cache_dir) / model_id / "transcripts.jsonl"
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def load(self) -> dict[tuple[str, str, int], JudgeTranscript]:
        cached: dict[tuple[str, str, int], JudgeTranscript] = {}
        if not self.path.exists():
            return cached
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                t = JudgeTranscript.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError):
                continue  # torn/foreign line: cache miss, the case re-judges
            cached[(t.case_id, t.prompt_hash, t.sample)] = t
        return cached

    def append(self, transcript: JudgeTranscript) -> None:
        line = (json.dumps(transcript.to_dict(), ensure_ascii=False) + "\n").encode("utf-8")
        with open(self.path, "ab") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                if fh.tell() > 0:
                    # newline-terminate a torn tail so this entry parses
                    with open(self.path, "rb") as reader:
                        reader.seek(-1, 2)
                        if reader.read(1) != b"\n":
                            fh.write(b"\n")
                fh.write(line)
                fh.flush()
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class _WorkItem:
    case: CaseRecord
    sample: int
    prompt: HcrPrompt | None = None
    error: str | None = None
    features: VisualFeatures | None = None


def _prepare_item(
    case: CaseRecord,
    sample: int,
    assets_dir: Path,
    provider: ProviderConfig | MockProvider,
    prompt_version: str,
) -> _WorkItem:
    item = _WorkItem(case=case, sample=sample)
    try:
        image_bytes = (assets_dir / case.image_ref).read_bytes()
        context = ClinicalContext(target=case.target, modality=case.modality, group=case.group)
        item.prompt = build_hcr_prompt(context, image_bytes, version=prompt_version)
        if isinstance(provider, MockProvider):
            image = RasterImage.from_png_bytes(image_bytes)
            candidate = BinaryMask.load(assets_dir / case.mask_ref)
            truth_file = assets_dir / provider.truth_dirname / f"{case.id}.png"
            reference = BinaryMask.load(truth_file) if truth_file.exists() else None
            item.features = extract_features(image, candidate, reference)
    except OSError as exc:
        item.error = f"asset unreadable: {exc}"
    return item


def _judge_item(
    item: _WorkItem,
    provider: ProviderConfig | MockProvider,
    rubric: Rubric,
    transport: httpx.BaseTransport | None,
    sleep: Callable[[float], None],
) -> JudgeTranscript:
    model_id = provider.model_id
    if item.error is not None or item.prompt is None:
        return JudgeTranscript(
            case_id=item.case.id,
            model_id=model_id,
            prompt_hash=item.prompt.prompt_hash if item.prompt else "",
            raw_text="",
            outcome=ParseFailure(ParseFailureKind.TRANSPORT, item.error or "no prompt"),
            attempts=1,
            latency_ms=0.0,
            timestamp=_utc_now(),
            sample=item.sample,
        )

    if isinstance(provider, MockProvider):
        assert item.features is not None
        raw_text = json.dumps(mock_judge(item.features, rubric).to_dict(), indent=2)
        return JudgeTranscript(
            case_id=item.case.id,
            model_id=model_id,
            prompt_hash=item.prompt.prompt_hash,
            raw_text=raw_text,
            outcome=parse_assessment(raw_text, rubric),
            attempts=1,
            latency_ms=0.0,
            timestamp=EPOCH_UTC,
            sample=item.sample,
        )

    started = time.monotonic()
    try:
        raw_text, attempts = _send_with_retries(item.prompt, provider, transport=transport, sleep=sleep)
        outcome: JudgeOutcome = parse_assessment(raw_text, rubric)
    except (AuthError, TransportError, TransientExhaustedError) as exc:
        raw_text = ""
        attempts = getattr(exc, "attempts", 1)
        outcome = ParseFailure(ParseFailureKind.TRANSPORT, str(exc))
    latency_ms = (time.monotonic() - started) * 1000.0
    return JudgeTranscript(
        case_id=item.case.id,
        model_id=model_id,
        prompt_hash=item.prompt.prompt_hash,
        raw_text=raw_text,
        outcome=outcome,
        attempts=attempts,
        latency_ms=latency_ms,
        timestamp=_utc_now(),
        sample=item.sample,
    )


def run_batch(
    cases: list[CaseRecord],
    provider: ProviderConfig | MockProvider,
    cache_dir: str | Path,
    assets_dir: str | Path,
    samples: int = 1,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
    prompt_version: str | None = None,
) -> list[JudgeTranscript]:
    """Judge every (case, sample) pair, reusing cached transcripts keyed by
    (case_id, prompt_hash, sample). Output order matches input order; a
    failing case yields a failure transcript instead of aborting."""
    assets = Path(assets_dir)
    rubric = default_rubric()
    store = TranscriptStore(cache_dir, provider.model_id)
    cached = store.load()

    version = prompt_version or PROMPT_VERSION
    items = [
        _prepare_item(case, sample, assets, provider, version)
        for case in cases
        for sample in range(samples)
    ]

    def key_of(item: _WorkItem) -> tuple[str, str, int]:
        return (item.case.id, item.prompt.prompt_hash if item.prompt else "", item.sample)

    pending = [item for item in items if key_of(item) not in cached]
    if pending:
        with ThreadPoolExecutor(max_workers=provider.max_parallel) as pool:
            fresh = list(
                pool.map(lambda it: _judge_item(it, provider, rubric, transport, sleep), pending)
            )
        for transcript in fresh:  # input order keeps the cache file deterministic
            store.append(transcript)
            cached[(transcript.case_id, transcript.prompt_hash, transcript.sample)] = transcript

    return [cached[key_of(item)] for item in items]
