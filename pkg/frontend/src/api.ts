// Thin typed client over the service endpoints. Errors are surfaced as
// ApiError with the server's message; nothing is swallowed.

import type { CaseBundle, CasePage, LabelEvent, MetricsResponse, QualityLabel, QueueFilter } from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, `service unreachable: ${String(err)}`);
  }
  let body: unknown = null;
  const text = await response.text();
  if (text) {
    try {
      body = JSON.parse(text);
    } catch {
      body = text;
    }
  }
  if (!response.ok) {
    const detail =
      body && typeof body === 'object' && 'error' in body
        ? String((body as { error: unknown }).error)
        : `HTTP ${response.status}`;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export class ReviewApi {
  constructor(readonly baseUrl: string = '') {}

  queueUrl(filter: QueueFilter, offset: number, limit: number): string {
    const params = new URLSearchParams();
    if (filter.group !== undefined) params.set('group', filter.group);
    if (filter.decision !== undefined) params.set('decision', filter.decision);
    if (filter.labeled !== undefined) params.set('labeled', String(filter.labeled));
    params.set('offset', String(offset));
    params.set('limit', String(limit));
    return `${this.baseUrl}/api/cases?${params.toString()}`;
  }

  fetchQueue(filter: QueueFilter, offset = 0, limit = 100): Promise<CasePage> {
    return request<CasePage>(this.queueUrl(filter, offset, limit));
  }

  fetchBundle(caseId: string): Promise<CaseBundle> {
    return request<CaseBundle>(`${this.baseUrl}/api/cases/${encodeURIComponent(caseId)}`);
  }

  postLabel(
    caseId: string,
    label: QualityLabel,
    reviewer: string,
    note?: string,
  ): Promise<{ stored: LabelEvent; effective_label: QualityLabel }> {
    return request(`${this.baseUrl}/api/cases/${encodeURIComponent(caseId)}/label`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(note === undefined ? { label, reviewer } : { label, reviewer, note }),
    });
  }

  fetchMetrics(positiveClass: QualityLabel = 'reject'): Promise<MetricsResponse> {
    return request<MetricsResponse>(`${this.baseUrl}/api/metrics?positive_class=${positiveClass}`);
  }

  overlayUrl(ref: string): string {
    return `${this.baseUrl}${ref}`;
  }
}
