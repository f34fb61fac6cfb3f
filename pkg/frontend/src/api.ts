/** Thin client over the service HTTP API; the only way this UI touches data. */

import type {
  CanonicalQuery,
  FeedbackPayload,
  FeedbackReceipt,
  QueryResponse,
  UploadPayload,
} from './types';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export interface QueryRequest {
  query_id?: number;
  query_text?: string;
  doc_ids?: string[];
  k?: number;
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<{ status: number; data: T }> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    const data = (await resp.json()) as T;
    return { status: resp.status, data };
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!resp.ok) {
      throw new ApiError(resp.status, `GET ${path} failed with ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  async listQueries(): Promise<CanonicalQuery[]> {
    const body = await this.get<{ queries: CanonicalQuery[] }>('/queries');
    return body.queries;
  }

  async uploadDocument(payload: UploadPayload): Promise<{ doc_id: string; created: boolean }> {
    const { status, data } = await this.post<{ doc_id: string; created: boolean; detail?: string }>(
      '/documents',
      payload,
    );
    if (status >= 400) {
      throw new ApiError(status, data.detail ?? `upload failed with ${status}`);
    }
    return data;
  }

  /**
   * Run a query. A 503 with a body still carries partial retrieval-only
   * results, so it is returned rather than thrown.
   */
  async runQuery(request: QueryRequest): Promise<QueryResponse> {
    const { status, data } = await this.post<QueryResponse & { detail?: string }>('/query', request);
    if (status >= 400 && status !== 503) {
      throw new ApiError(status, data.detail ?? `query failed with ${status}`);
    }
    if (status === 503 && !Array.isArray(data.results)) {
      throw new ApiError(status, data.detail ?? 'service unavailable');
    }
    return data;
  }

  /** One POST per submission, with a single retry on transient network failure. */
  async submitFeedback(payload: FeedbackPayload): Promise<FeedbackReceipt> {
    let lastError: unknown;
    for (let attempt = 0; attempt < 2; attempt++) {
      try {
        const { status, data } = await this.post<FeedbackReceipt & { detail?: string }>(
          '/feedback',
          payload,
        );
        if (status >= 400) {
          throw new ApiError(status, data.detail ?? `feedback failed with ${status}`);
        }
        return data;
      } catch (err) {
        if (err instanceof ApiError) {
          throw err; // the service answered; do not retry or double-submit
        }
        lastError = err;
      }
    }
    throw lastError instanceof Error ? lastError : new Error('feedback submission failed');
  }
}
