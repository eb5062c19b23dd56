"""Local HTTP review service: cases, overlays, transcripts, decisions,
metrics, and clinician label intake. Backend for the review UI and for
programmatic access.

Loopback-only by default; pass host="0.0.0.0" explicitly to open it to a
LAN. No authentication: this is a single-site review tool.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .dataset import Manifest, QualityLabel
from .errors import StorageError
from .guardrail import Decision
from .judge import JudgeTranscript
from .labelstore import LabelStore
from .metrics import compute_metrics
from .service_state import ServiceState

MAX_PAGE_LIMIT = 500

_PLACEHOLDER_HTML = """<!doctype html>
<html><head><title>segqc review service</title></head>
<body><h1>segqc review service</h1>
<p>No review UI bundle is configured. The JSON API lives under <code>/api</code>:</p>
<ul>
<li>GET /api/cases</li>
<li>GET /api/cases/{id}</li>
<li>GET /api/cases/{id}/overlay.png</li>
<li>POST /api/cases/{id}/label</li>
<li>GET /api/metrics</li>
</ul></body></html>"""


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _decision_payload(decision: Decision | None) -> dict | None:
    return decision.to_dict() if decision else None


def _transcript_payload(transcript: JudgeTranscript | None) -> dict | None:
    return transcript.to_dict() if transcript else None


def create_app(state: ServiceState, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="segqc review service", docs_url=None, redoc_url=None)

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz() -> str:
        return "ok"

    @app.get("/api/cases")
    def list_cases(
        group: str | None = None,
        decision: str | None = None,
        labeled: bool | None = None,
        offset: int = 0,
        limit: int = 100,
    ):
        if not 1 <= limit <= MAX_PAGE_LIMIT:
            return _error(400, f"limit must be in [1, {MAX_PAGE_LIMIT}]")
        if offset < 0:
            return _error(400, "offset must be >= 0")
        if group is not None and group not in state.known_groups:
            return _error(400, f"unknown group {group!r}")
        if decision is not None:
            try:
                wanted = QualityLabel(decision)
            except ValueError:
                return _error(400, f"decision filter must be accept or reject, got {decision!r}")
        else:
            wanted = None

        effective = state.effective_labels()
        selected = []
        for case in state.manifest:
            if group is not None and case.group != group:
                continue
            case_decision = state.decision_for(case.id)
            if wanted is not None and (case_decision is None or case_decision.label != wanted):
                continue
            has_label = case.id in effective
            if labeled is not None and has_label != labeled:
                continue
            selected.append((case, case_decision, effective.get(case.id)))

        page = selected[offset : offset + limit]
        return {
            "total": len(selected),
            "offset": offset,
            "limit": limit,
            "items": [
                {
                    "case": case.to_dict(),
                    "overlay_ref": f"/api/cases/{case.id}/overlay.png",
                    "decision": _decision_payload(dec),
                    "effective_label": label.value if label else None,
                    "has_transcript": state.transcripts_for(case.id) != [],
                }
                for case, dec, label in page
            ],
        }

    @app.get("/api/cases/{case_id}")
    def get_case_bundle(case_id: str):
        case = state.case(case_id)
        if case is None:
            return _error(404, f"unknown case {case_id!r}")
        transcripts = state.transcripts_for(case_id)
        transcript = transcripts[0] if transcripts else None
        decision = state.decision_for(case_id)
        label = state.effective_labels().get(case_id)
        return {
            "case": case.to_dict(),
            "overlay_ref": f"/api/cases/{case_id}/overlay.png",
            "transcript": _transcript_payload(transcript),
            "decision": _decision_payload(decision),
            "effective_label": label.value if label else None,
            "label_history": [e.to_dict() for e in state.labels.history(case_id)],
        }

    @app.get("/api/cases/{case_id}/overlay.png")
    def get_overlay(case_id: str):
        case = state.case(case_id)
        if case is None:
            return _error(404, f"unknown case {case_id!r}")
        try:
            png = state.overlay_png(case_id)
        except OSError as exc:
            return _error(503, f"case assets unreadable: {exc}")
        return Response(content=png, media_type="image/png")

    @app.post("/api/cases/{case_id}/label", status_code=201)
    async def post_label(case_id: str, body: dict):
        case = state.case(case_id)
        if case is None:
            return _error(404, f"unknown case {case_id!r}")
        raw_label = body.get("label")
        try:
            label = QualityLabel(raw_label)
        except ValueError:
            return _error(400, f"label must be accept or reject, got {raw_label!r}")
        reviewer = body.get("reviewer")
        if not isinstance(reviewer, str) or not reviewer.strip():
            return _error(400, "reviewer must be a nonempty string")
        note = body.get("note")
        if note is not None and not isinstance(note, str):
            return _error(400, "note must be a string when present")
        try:
            event = state.labels.append(case_id, label, reviewer.strip(), note)
        except StorageError as exc:
            return _error(503, str(exc))
        return {"stored": event.to_dict(), "effective_label": label.value}

    @app.get("/api/metrics")
    def get_metrics(positive_class: str = "reject"):
        try:
            positive = QualityLabel(positive_class)
        except ValueError:
            return _error(400, f"positive_class must be accept or reject, got {positive_class!r}")
        decisions, gt = state.scored_pairs()
        if not decisions:
            return {"n": 0, "positive_class": positive.value, "overall": None, "detail": "no case has both a decision and a label"}
        cm, report = compute_metrics(decisions, gt, positive)
        return {
            "n": report.n,
            "positive_class": positive.value,
            "confusion": {"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn},
            "overall": report.overall.as_dict(),
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:
        @app.get("/", response_class=Response)
        def index() -> Response:
            return Response(content=_PLACEHOLDER_HTML, media_type="text/html")

    return app


def build_state(
    manifest: Manifest,
    assets_dir: str | Path,
    label_log: str | Path,
    transcripts: list[JudgeTranscript] | None = None,
) -> ServiceState:
    return ServiceState(
        manifest=manifest,
        assets_dir=Path(assets_dir),
        labels=LabelStore(label_log),
        transcripts=transcripts or [],
    )
