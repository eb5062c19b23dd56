// Review queue state machine, kept pure for testability.
//
// Invariants: the cursor always points inside the fetched page (or -1 when
// empty), and at most one label submission is in flight per case.
// Optimistic labels are applied immediately and rolled back on failure.

import type { CaseSummary, QualityLabel, QueueFilter } from './types.js';

export interface PendingSubmission {
  caseId: string;
  label: QualityLabel;
  previous: QualityLabel | null;
}

export class ReviewQueueState {
  filter: QueueFilter = {};
  items: CaseSummary[] = [];
  total = 0;
  offset = 0;
  cursor = -1;
  private pending = new Map<string, PendingSubmission>();

  get current(): CaseSummary | null {
    return this.cursor >= 0 && this.cursor < this.items.length ? this.items[this.cursor] : null;
  }

  setPage(items: CaseSummary[], total: number, offset: number): void {
    this.items = items;
    this.total = total;
    this.offset = offset;
    if (items.length === 0) {
      this.cursor = -1;
    } else if (this.cursor < 0 || this.cursor >= items.length) {
      this.cursor = 0;
    }
  }

  select(index: number): void {
    if (this.items.length === 0) {
      this.cursor = -1;
      return;
    }
    this.cursor = Math.min(Math.max(index, 0), this.items.length - 1);
  }

  selectCase(caseId: string): boolean {
    const index = this.items.findIndex((item) => item.case.id === caseId);
    if (index < 0) return false;
    this.cursor = index;
    return true;
  }

  next(): void {
    this.select(this.cursor + 1);
  }

  previous(): void {
    this.select(this.cursor - 1);
  }

  /** Advance to the next case without an effective label, if any. */
  nextUnlabeled(): boolean {
    for (let step = 1; step <= this.items.length; step += 1) {
      const index = (this.cursor + step) % this.items.length;
      if (this.items[index].effective_label === null) {
        this.cursor = index;
        return true;
      }
    }
    return false;
  }

  hasPending(caseId: string): boolean {
    return this.pending.has(caseId);
  }

  /**
   * Apply an optimistic label. Returns the submission ticket, or null when
   * one is already in flight for this case (the caller must not POST).
   */
  beginSubmission(caseId: string, label: QualityLabel): PendingSubmission | null {
    if (this.pending.has(caseId)) return null;
    const item = this.items.find((entry) => entry.case.id === caseId);
    if (!item) return null;
    const ticket: PendingSubmission = { caseId, label, previous: item.effective_label };
    this.pending.set(caseId, ticket);
    item.effective_label = label;
    return ticket;
  }

  /** Server acknowledged: keep the optimistic value, clear the ticket. */
  confirmSubmission(caseId: string): void {
    this.pending.delete(caseId);
  }

  /** Server refused: restore the pre-optimistic label, clear the ticket. */
  rollbackSubmission(caseId: string): void {
    const ticket = this.pending.get(caseId);
    if (!ticket) return;
    const item = this.items.find((entry) => entry.case.id === caseId);
    if (item) item.effective_label = ticket.previous;
    this.pending.delete(caseId);
  }

  pendingCount(): number {
    return this.pending.size;
  }
}
