/** Shapes of the service JSON API this UI consumes. */

export interface DocumentMetadata {
  company: string;
  language: string;
  region: string;
  date: string;
  source_name?: string;
}

export interface UploadPayload {
  doc_id: string;
  parser_style: 'layout_markdown' | 'plain_lines';
  raw_text: string;
  metadata: DocumentMetadata;
}

export interface CanonicalQuery {
  query_id: number;
  text: string;
}

export interface StanceInfo {
  score: number;
  reason: string;
  strategy: string;
}

export interface EvidenceItem {
  chunk_id: string;
  doc_id: string;
  text: string;
  block_span: [number, number];
  rank: number;
  original_rank: number;
  rerank_score: number;
  context_before: string;
  context_after: string;
  stance: StanceInfo | null;
}

export interface ProviderErrorInfo {
  provider: string;
  error: string;
  chunk_id?: string;
}

export interface QueryResponse {
  run_id: string;
  query_id: number;
  query_text: string;
  partial: boolean;
  provider_errors: ProviderErrorInfo[];
  results: EvidenceItem[];
}

export type Verdict = 'accept' | 'reject' | 'correct';

export interface FeedbackPayload {
  artifact_id: string;
  query_id: number;
  doc_id: string;
  chunk_id: string;
  shown_stance: number | null;
  analyst_stance?: number;
  verdict: Verdict;
  note?: string;
}

export interface FeedbackReceipt {
  entry_id: string;
}
