// Application wiring: queue fetch/render, keyboard review loop, optimistic
// label submission with rollback, error banner with retry.

import { ApiError, ReviewApi } from './api.js';
import { renderDetail, renderQueueRow } from './panels.js';
import { ReviewQueueState } from './state.js';
import type { CaseBundle, QualityLabel, QueueFilter } from './types.js';

const PAGE_LIMIT = 200;

export class ReviewApp {
  readonly state = new ReviewQueueState();
  private bundle: CaseBundle | null = null;
  private reviewer: string;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ReviewApi,
    reviewer?: string,
  ) {
    this.reviewer = reviewer ?? '';
    this.root.innerHTML = '';
    this.root.appendChild(this.buildChrome());
    this.bindKeyboard();
  }

  // ---- DOM scaffold ------------------------------------------------------

  private buildChrome(): HTMLElement {
    const layout = document.createElement('div');
    layout.className = 'layout';
    layout.innerHTML = `
      <header class="topbar">
        <h1>segqc review</h1>
        <div class="filters">
          <select id="filter-labeled">
            <option value="">all cases</option>
            <option value="false">unlabeled</option>
            <option value="true">labeled</option>
          </select>
          <select id="filter-decision">
            <option value="">any decision</option>
            <option value="accept">accepted</option>
            <option value="reject">rejected</option>
          </select>
          <input id="reviewer" placeholder="reviewer name" />
          <span id="metrics-chip" class="metrics-chip"></span>
        </div>
      </header>
      <div id="error-banner" class="error-banner hidden">
        <span id="error-text"></span>
        <button id="error-retry">retry</button>
      </div>
      <main class="content">
        <aside id="queue" class="queue"></aside>
        <section id="detail" class="detail">
          <div class="empty-state">loading cases&hellip;</div>
        </section>
      </main>
      <footer class="help">A accept &middot; R reject &middot; &larr;/&rarr; navigate &middot; scroll to zoom, drag to pan</footer>
    `;
    return layout;
  }

  private $(selector: string): HTMLElement {
    const node = this.root.querySelector(selector);
    if (!node) throw new Error(`missing element ${selector}`);
    return node as HTMLElement;
  }

  // ---- lifecycle ---------------------------------------------------------

  async start(): Promise<void> {
    const labeled = this.$('#filter-labeled') as HTMLSelectElement;
    const decision = this.$('#filter-decision') as HTMLSelectElement;
    const reviewer = this.$('#reviewer') as HTMLInputElement;
    reviewer.value = this.reviewer;
    labeled.addEventListener('change', () => void this.applyFilters());
    decision.addEventListener('change', () => void this.applyFilters());
    reviewer.addEventListener('change', () => {
      this.reviewer = reviewer.value.trim();
    });
    this.$('#error-retry').addEventListener('click', () => void this.refreshQueue());
    this.$('#queue').addEventListener('click', (event) => {
      const row = (event.target as HTMLElement).closest('.queue-row') as HTMLElement | null;
      if (row?.dataset.caseId) {
        this.state.selectCase(row.dataset.caseId);
        void this.showCurrent();
      }
    });
    await this.refreshQueue();
    await this.refreshMetrics();
  }

  private currentFilter(): QueueFilter {
    const filter: QueueFilter = {};
    const labeled = (this.$('#filter-labeled') as HTMLSelectElement).value;
    if (labeled !== '') filter.labeled = labeled === 'true';
    const decision = (this.$('#filter-decision') as HTMLSelectElement).value;
    if (decision !== '') filter.decision = decision as QualityLabel;
    return filter;
  }

  private async applyFilters(): Promise<void> {
    this.state.cursor = -1;
    await this.refreshQueue();
  }

  async refreshQueue(): Promise<void> {
    this.hideError();
    try {
      const page = await this.api.fetchQueue(this.currentFilter(), 0, PAGE_LIMIT);
      this.state.filter = this.currentFilter();
      this.state.setPage(page.items, page.total, page.offset);
      this.renderQueue();
      await this.showCurrent();
    } catch (err) {
      this.showError(`could not load cases: ${(err as Error).message}`);
    }
  }

  async refreshMetrics(): Promise<void> {
    try {
      const metrics = await this.api.fetchMetrics();
      const chip = this.$('#metrics-chip');
      if (metrics.overall === null) {
        chip.textContent = 'metrics: no labeled+judged cases yet';
      } else {
        chip.textContent =
          `n=${metrics.n} acc=${metrics.overall.accuracy.toFixed(4)} ` +
          `f1=${metrics.overall.f1.toFixed(4)} (positive=${metrics.positive_class})`;
      }
    } catch {
      this.$('#metrics-chip').textContent = 'metrics unavailable';
    }
  }

  renderQueue(): void {
    const queue = this.$('#queue');
    queue.innerHTML = '';
    if (this.state.items.length === 0) {
      const empty = document.createElement('div');
      empty.className = 'empty-state';
      empty.textContent = 'no cases match the current filter';
      queue.appendChild(empty);
      return;
    }
    this.state.items.forEach((item, index) => {
      queue.appendChild(renderQueueRow(index, index === this.state.cursor, item));
    });
    const counter = document.createElement('div');
    counter.className = 'queue-counter';
    counter.textContent = `${this.state.items.length} of ${this.state.total} cases`;
    queue.appendChild(counter);
  }

  async showCurrent(): Promise<void> {
    const detail = this.$('#detail');
    const current = this.state.current;
    this.renderQueue();
    if (current === null) {
      detail.innerHTML = '<div class="empty-state">no case selected</div>';
      this.bundle = null;
      return;
    }
    try {
      this.bundle = await this.api.fetchBundle(current.case.id);
      detail.innerHTML = '';
      detail.appendChild(renderDetail(this.bundle, this.api.overlayUrl(this.bundle.overlay_ref)));
    } catch (err) {
      this.showError(`could not load case ${current.case.id}: ${(err as Error).message}`);
    }
  }

  // ---- labeling ----------------------------------------------------------

  async submitLabel(label: QualityLabel): Promise<void> {
    const current = this.state.current;
    if (current === null) return;
    if (!this.reviewer) {
      this.showError('set a reviewer name before labeling');
      return;
    }
    const ticket = this.state.beginSubmission(current.case.id, label);
    if (ticket === null) return; // one in-flight submission per case
    this.renderQueue();
    try {
      await this.api.postLabel(current.case.id, label, this.reviewer);
      this.state.confirmSubmission(current.case.id);
      this.hideError();
      if (!this.state.nextUnlabeled()) {
        // queue exhausted: stay put but refresh the detail pane
      }
      await this.showCurrent();
      await this.refreshMetrics();
    } catch (err) {
      this.state.rollbackSubmission(current.case.id);
      this.renderQueue();
      const detail =
        err instanceof ApiError ? `${err.status || 'network'}: ${err.message}` : String(err);
      this.showError(`label not saved (${detail})`);
    }
  }

  // ---- keyboard ----------------------------------------------------------

  private bindKeyboard(): void {
    document.addEventListener('keydown', (event) => {
      const target = event.target as HTMLElement | null;
      if (target && (target.tagName === 'INPUT' || target.tagName === 'TEXTAREA' || target.tagName === 'SELECT')) {
        return;
      }
      switch (event.key.toLowerCase()) {
        case 'a':
          void this.submitLabel('accept');
          break;
        case 'r':
          void this.submitLabel('reject');
          break;
        case 'arrowright':
          this.state.next();
          void this.showCurrent();
          break;
        case 'arrowleft':
          this.state.previous();
          void this.showCurrent();
          break;
        default:
          return;
      }
      event.preventDefault();
    });
  }

  // ---- errors ------------------------------------------------------------

  showError(message: string): void {
    const banner = this.$('#error-banner');
    banner.classList.remove('hidden');
    this.$('#error-text').textContent = message;
  }

  hideError(): void {
    this.$('#error-banner').classList.add('hidden');
  }
}

export function initApp(root: HTMLElement, baseUrl = '', reviewer?: string): ReviewApp {
  return new ReviewApp(root, new ReviewApi(baseUrl), reviewer);
}
