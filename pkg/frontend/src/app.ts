/** Review flow wiring: upload, query, render, feedback. State drives the DOM. */

import { ApiClient } from './api';
import type {
  CanonicalQuery,
  FeedbackPayload,
  QueryResponse,
  UploadPayload,
  Verdict,
} from './types';
import { FREE_TEXT_OPTION, renderQueryPicker, renderResults } from './view';

interface AppState {
  queries: CanonicalQuery[];
  selectedQueryId: number | null;
  freeText: string;
  response: QueryResponse | null;
  notice: string;
}

export class ReviewApp {
  private state: AppState = {
    queries: [],
    selectedQueryId: null,
    freeText: '',
    response: null,
    notice: '',
  };

  private inFlightFeedback = new Set<string>();

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {
    this.root.addEventListener('click', (event) => {
      const target = event.target as HTMLElement | null;
      if (!target) return;
      if (target.classList.contains('run-query')) {
        void this.runQuery();
        return;
      }
      const verdict = target.dataset.verdict as Verdict | undefined;
      const chunkId = target.dataset.chunkId;
      if (verdict && chunkId) {
        void this.submitFeedback(chunkId, verdict);
      }
    });
    this.root.addEventListener('change', (event) => {
      const target = event.target as HTMLElement | null;
      if (target instanceof HTMLSelectElement && target.classList.contains('query-select')) {
        if (target.value === FREE_TEXT_OPTION) {
          this.state.selectedQueryId = null;
        } else {
          this.state.selectedQueryId = Number(target.value);
        }
        this.render();
      }
    });
  }

  async init(): Promise<void> {
    this.state.queries = await this.api.listQueries();
    this.state.selectedQueryId = this.state.queries[0]?.query_id ?? null;
    this.render();
  }

  getState(): Readonly<AppState> {
    return this.state;
  }

  async uploadDocument(payload: UploadPayload): Promise<void> {
    const result = await this.api.uploadDocument(payload);
    this.state.notice = result.created
      ? `Uploaded ${result.doc_id}.`
      : `${result.doc_id} already present.`;
    this.render();
  }

  selectQuery(queryId: number | null, freeText = ''): void {
    this.state.selectedQueryId = queryId;
    this.state.freeText = freeText;
    this.render();
  }

  async runQuery(): Promise<QueryResponse> {
    const request =
      this.state.selectedQueryId !== null
        ? { query_id: this.state.selectedQueryId }
        : { query_text: this.readFreeText() };
    const response = await this.api.runQuery(request);
    this.state.response = response;
    this.state.notice = '';
    this.render();
    return response;
  }

  private readFreeText(): string {
    const input = this.root.querySelector<HTMLInputElement>('.free-text-input');
    return input?.value ?? this.state.freeText;
  }

  async submitFeedback(chunkId: string, verdict: Verdict): Promise<void> {
    const response = this.state.response;
    if (!response || !response.run_id) {
      return; // no query artifact yet, controls should be disabled anyway
    }
    if (this.inFlightFeedback.has(chunkId)) {
      return; // one POST per submission, no double fire
    }
    const item = response.results.find((r) => r.chunk_id === chunkId);
    if (!item) return;

    const payload: FeedbackPayload = {
      artifact_id: response.run_id,
      query_id: response.query_id,
      doc_id: item.doc_id,
      chunk_id: item.chunk_id,
      shown_stance: item.stance ? item.stance.score : null,
      verdict,
    };
    if (verdict === 'correct') {
      const picker = this.root.querySelector<HTMLSelectElement>(
        `.stance-pick[data-chunk-id="${chunkId}"]`,
      );
      payload.analyst_stance = Number(picker?.value ?? 0);
    }

    this.inFlightFeedback.add(chunkId);
    try {
      const receipt = await this.api.submitFeedback(payload);
      this.setFeedbackStatus(chunkId, `recorded (${receipt.entry_id})`);
    } catch (err) {
      this.setFeedbackStatus(chunkId, `failed: ${err instanceof Error ? err.message : err}`);
    } finally {
      this.inFlightFeedback.delete(chunkId);
    }
  }

  private setFeedbackStatus(chunkId: string, text: string): void {
    const card = this.root.querySelector(`.evidence-card[data-chunk-id="${chunkId}"]`);
    const status = card?.querySelector('.feedback-status');
    if (status) {
      status.textContent = text;
    }
  }

  render(): void {
    this.root.textContent = '';

    if (this.state.notice) {
      const notice = document.createElement('p');
      notice.className = 'notice';
      notice.textContent = this.state.notice;
      this.root.appendChild(notice);
    }

    const picker = renderQueryPicker(this.state.queries);
    const select = picker.querySelector<HTMLSelectElement>('.query-select');
    const freeInput = picker.querySelector<HTMLInputElement>('.free-text-input');
    if (select) {
      select.value =
        this.state.selectedQueryId !== null ? String(this.state.selectedQueryId) : FREE_TEXT_OPTION;
    }
    if (freeInput) {
      freeInput.hidden = this.state.selectedQueryId !== null;
      freeInput.value = this.state.freeText;
    }
    this.root.appendChild(picker);

    if (this.state.response) {
      this.root.appendChild(renderResults(this.state.response));
    }
  }
}
