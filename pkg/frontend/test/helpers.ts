import type { CaseSummary, Decision } from '../src/types.js';

export function summary(
  id: string,
  opts: { decision?: Decision | null; label?: 'accept' | 'reject' | null; group?: string } = {},
): CaseSummary {
  return {
    case: {
      id,
      group: opts.group ?? 'phantom-ct',
      modality: 'CT',
      target: 'Synthetic Lesion',
      image_ref: `images/${id}.png`,
      mask_ref: `masks/${id}.png`,
      expert_score: null,
      gt_label: null,
      split: null,
    },
    overlay_ref: `/api/cases/${id}/overlay.png`,
    decision: opts.decision === undefined ? acceptDecision() : opts.decision,
    effective_label: opts.label ?? null,
    has_transcript: true,
  };
}

export function acceptDecision(score = 5): Decision {
  return { label: 'accept', score, flags: [], ensemble_n: null, score_spread: null };
}

export function rejectDecision(score = 2): Decision {
  return { label: 'reject', score, flags: [], ensemble_n: null, score_spread: null };
}

export function failClosedDecision(): Decision {
  return {
    label: 'reject',
    score: null,
    flags: ['invalid_output', 'fail_closed'],
    ensemble_n: null,
    score_spread: null,
  };
}

export function assessment(score = 4, category = 'acceptable with minor edits') {
  return {
    knowledge_recall: 'expected appearance recalled',
    visual_features: {
      contour_continuity: 'single closed region',
      edge_clarity: 'clear transition',
      texture_homogeneity: 'homogeneous',
    },
    anatomical_inference: {
      plausibility: 'plausible',
      under_segmentation: 'none observed',
      spillage: 'none observed',
    },
    clinical_synthesis: { summary: 'clean contour', score, category },
  };
}
