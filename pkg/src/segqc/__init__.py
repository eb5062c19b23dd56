"""Quality control for AI-generated 2D medical image segmentations.

Pipeline: build or load a case manifest, judge each segmentation with a
multimodal model (or the deterministic offline mock), convert outcomes
into fail-closed accept/reject decisions, and score the system against
expert labels with a metrics and consistency-audit engine.
"""

from .dataset import (
    CaseRecord,
    Manifest,
    Modality,
    QualityLabel,
    Split,
    load_manifest,
    save_manifest,
    score_to_label,
    split_dataset,
    summarize_groups,
)
from .guardrail import Decision, decide, decide_case, ensemble_decide
from .imaging import (
    BinaryMask,
    OverlapStats,
    RasterImage,
    RegionTopology,
    VisualFeatures,
    extract_features,
    overlap_stats,
    region_topology,
    render_overlay,
)
from .judge import (
    HcrAssessment,
    JudgeTranscript,
    MockProvider,
    ParseFailure,
    ProviderConfig,
    mock_judge,
    parse_assessment,
    run_batch,
    send_judge_request,
)
from .metrics import ConfusionMatrix, MetricsReport, compute_metrics, per_group_breakdown
from .audit import AuditResult, audit_reported_row
from .phantoms import DefectClass, PhantomSpec, generate_phantom_suite
from .prompts import ClinicalContext, HcrPrompt, Rubric, build_hcr_prompt, output_schema_and_rubric

__version__ = "0.1.0"
