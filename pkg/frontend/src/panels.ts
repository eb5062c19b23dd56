// DOM builders for the case detail view: the four reasoning-stage panels,
// the verdict banner, and the zoomable overlay. A fail-closed decision can
// never render an accept banner; renderVerdict guards this structurally.

import type { Assessment, CaseBundle, Decision } from './types.js';
import { isFailClosed } from './types.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function panel(title: string, rows: Array<[string, string]>): HTMLElement {
  const section = el('section', 'stage-panel');
  section.appendChild(el('h3', 'stage-title', title));
  for (const [name, value] of rows) {
    const row = el('div', 'stage-row');
    row.appendChild(el('span', 'stage-key', name));
    row.appendChild(el('span', 'stage-value', value));
    section.appendChild(row);
  }
  return section;
}

export function renderStagePanels(assessment: Assessment): HTMLElement[] {
  return [
    panel('Knowledge Recall', [['recalled knowledge', assessment.knowledge_recall]]),
    panel('Visual Features', [
      ['contour continuity', assessment.visual_features.contour_continuity],
      ['edge clarity', assessment.visual_features.edge_clarity],
      ['texture homogeneity', assessment.visual_features.texture_homogeneity],
    ]),
    panel('Anatomical Inference', [
      ['plausibility', assessment.anatomical_inference.plausibility],
      ['under-segmentation', assessment.anatomical_inference.under_segmentation],
      ['spillage', assessment.anatomical_inference.spillage],
    ]),
    panel('Clinical Synthesis', [
      ['summary', assessment.clinical_synthesis.summary],
      ['score', `${assessment.clinical_synthesis.score} / 5`],
      ['category', assessment.clinical_synthesis.category],
    ]),
  ];
}

export function renderVerdict(decision: Decision | null): HTMLElement {
  const banner = el('div', 'verdict-banner');
  if (decision === null) {
    banner.classList.add('verdict-none');
    banner.textContent = 'not yet judged';
    return banner;
  }
  if (isFailClosed(decision)) {
    // Fail-closed is always a rejection; never show an accept treatment.
    banner.classList.add('verdict-fail-closed');
    banner.setAttribute('role', 'alert');
    banner.textContent = 'REJECT - judge output invalid, failed closed';
    return banner;
  }
  const label = decision.label;
  banner.classList.add(label === 'accept' ? 'verdict-accept' : 'verdict-reject');
  const score = decision.score !== null ? ` (score ${decision.score})` : '';
  const ensemble =
    decision.ensemble_n !== null && decision.flags.includes('ensembled')
      ? ` [ensemble of ${decision.ensemble_n}]`
      : '';
  banner.textContent = `${label.toUpperCase()}${score}${ensemble}`;
  return banner;
}

export function renderDetail(bundle: CaseBundle, overlayUrl: string): HTMLElement {
  const root = el('div', 'case-detail');

  const header = el('div', 'case-header');
  header.appendChild(el('h2', 'case-id', bundle.case.id));
  header.appendChild(
    el('span', 'case-meta', `${bundle.case.group} | ${bundle.case.modality} | ${bundle.case.target}`),
  );
  root.appendChild(header);

  root.appendChild(renderVerdict(bundle.decision));

  root.appendChild(renderOverlay(overlayUrl));

  const outcome = bundle.transcript?.outcome ?? null;
  if (outcome === null) {
    root.appendChild(el('div', 'transcript-placeholder', 'not yet judged'));
  } else if (outcome.kind === 'assessment') {
    const stages = el('div', 'stage-panels');
    for (const stagePanel of renderStagePanels(outcome.assessment)) {
      stages.appendChild(stagePanel);
    }
    root.appendChild(stages);
  } else {
    const failure = el('div', 'transcript-failure');
    failure.appendChild(el('h3', 'stage-title', 'Judge output could not be parsed'));
    failure.appendChild(el('div', 'failure-kind', outcome.failure.kind));
    failure.appendChild(el('div', 'failure-detail', outcome.failure.detail));
    if (bundle.transcript?.raw_text) {
      const raw = el('details', 'raw-text');
      raw.appendChild(el('summary', undefined, 'raw model text'));
      raw.appendChild(el('pre', undefined, bundle.transcript.raw_text));
      failure.appendChild(raw);
    }
    root.appendChild(failure);
  }

  const labelState = el('div', 'label-state');
  labelState.textContent = bundle.effective_label
    ? `clinician label: ${bundle.effective_label}`
    : 'unlabeled - press A to accept, R to reject';
  root.appendChild(labelState);
  return root;
}

/** Overlay viewport with wheel zoom and drag pan via CSS transform. */
export function renderOverlay(url: string): HTMLElement {
  const viewport = el('div', 'overlay-viewport');
  const img = el('img', 'overlay-image') as HTMLImageElement;
  img.src = url;
  img.alt = 'segmentation overlay';
  img.draggable = false;
  viewport.appendChild(img);

  let scale = 1;
  let tx = 0;
  let ty = 0;
  const apply = () => {
    img.style.transform = `translate(${tx}px, ${ty}px) scale(${scale})`;
  };

  viewport.addEventListener('wheel', (event) => {
    event.preventDefault();
    const factor = event.deltaY < 0 ? 1.2 : 1 / 1.2;
    scale = Math.min(16, Math.max(0.25, scale * factor));
    apply();
  });

  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  viewport.addEventListener('mousedown', (event) => {
    dragging = true;
    lastX = event.clientX;
    lastY = event.clientY;
  });
  window.addEventListener('mouseup', () => {
    dragging = false;
  });
  window.addEventListener('mousemove', (event) => {
    if (!dragging) return;
    tx += event.clientX - lastX;
    ty += event.clientY - lastY;
    lastX = event.clientX;
    lastY = event.clientY;
    apply();
  });
  viewport.addEventListener('dblclick', () => {
    scale = 1;
    tx = 0;
    ty = 0;
    apply();
  });
  return viewport;
}

export function renderQueueRow(summaryIndex: number, active: boolean, summary: {
  case: { id: string; group: string };
  decision: Decision | null;
  effective_label: string | null;
}): HTMLElement {
  const row = el('div', 'queue-row' + (active ? ' active' : ''));
  row.dataset.caseId = summary.case.id;
  row.dataset.index = String(summaryIndex);
  row.appendChild(el('span', 'queue-id', summary.case.id));
  row.appendChild(el('span', 'queue-group', summary.case.group));

  const decision = summary.decision;
  if (decision === null) {
    row.appendChild(el('span', 'badge badge-none', 'unjudged'));
  } else if (isFailClosed(decision)) {
    row.appendChild(el('span', 'badge badge-fail-closed', 'fail-closed'));
  } else {
    row.appendChild(el('span', `badge badge-${decision.label}`, decision.label));
  }
  row.appendChild(
    summary.effective_label
      ? el('span', `badge badge-label-${summary.effective_label}`, `labeled ${summary.effective_label}`)
      : el('span', 'badge badge-unlabeled', 'unlabeled'),
  );
  return row;
}
