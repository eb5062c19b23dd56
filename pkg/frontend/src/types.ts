// Wire types mirroring the review service's JSON API.

export type QualityLabel = 'accept' | 'reject';

export interface CaseRecord {
  id: string;
  group: string;
  modality: string;
  target: string;
  image_ref: string;
  mask_ref: string;
  expert_score: number | null;
  gt_label: QualityLabel | null;
  split: string | null;
}

export interface Decision {
  label: QualityLabel;
  score: number | null;
  flags: string[];
  ensemble_n: number | null;
  score_spread: number | null;
}

export interface Assessment {
  knowledge_recall: string;
  visual_features: {
    contour_continuity: string;
    edge_clarity: string;
    texture_homogeneity: string;
  };
  anatomical_inference: {
    plausibility: string;
    under_segmentation: string;
    spillage: string;
  };
  clinical_synthesis: {
    summary: string;
    score: number;
    category: string;
  };
}

export type TranscriptOutcome =
  | { kind: 'assessment'; assessment: Assessment }
  | { kind: 'failure'; failure: { kind: string; detail: string; field: string | null } };

export interface Transcript {
  case_id: string;
  model_id: string;
  prompt_hash: string;
  sample: number;
  raw_text: string;
  outcome: TranscriptOutcome;
  attempts: number;
  latency_ms: number;
  timestamp: string;
}

export interface CaseSummary {
  case: CaseRecord;
  overlay_ref: string;
  decision: Decision | null;
  effective_label: QualityLabel | null;
  has_transcript: boolean;
}

export interface CasePage {
  total: number;
  offset: number;
  limit: number;
  items: CaseSummary[];
}

export interface LabelEvent {
  case_id: string;
  label: QualityLabel;
  reviewer: string;
  note: string | null;
  timestamp: string;
}

export interface CaseBundle {
  case: CaseRecord;
  overlay_ref: string;
  transcript: Transcript | null;
  decision: Decision | null;
  effective_label: QualityLabel | null;
  label_history: LabelEvent[];
}

export interface MetricsResponse {
  n: number;
  positive_class: QualityLabel;
  confusion?: { tp: number; fp: number; fn: number; tn: number };
  overall: {
    accuracy: number;
    precision: number;
    recall: number;
    f1: number;
    count: number;
    zero_division_flags: string[];
  } | null;
}

export interface QueueFilter {
  group?: string;
  decision?: QualityLabel;
  labeled?: boolean;
}

export const FAIL_CLOSED = 'fail_closed';

export function isFailClosed(decision: Decision | null): boolean {
  return decision !== null && decision.flags.includes(FAIL_CLOSED);
}
