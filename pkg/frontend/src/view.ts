/** DOM rendering. Every function builds elements from state alone. */

import { stanceBadge } from './badges';
import type { CanonicalQuery, EvidenceItem, QueryResponse } from './types';

export const FREE_TEXT_OPTION = 'free-text';

export function renderQueryPicker(queries: CanonicalQuery[]): HTMLElement {
  const wrap = document.createElement('div');
  wrap.className = 'query-picker';

  const select = document.createElement('select');
  select.className = 'query-select';
  for (const query of queries) {
    const option = document.createElement('option');
    option.value = String(query.query_id);
    option.textContent = `Q${query.query_id}: ${query.text}`;
    select.appendChild(option);
  }
  const free = document.createElement('option');
  free.value = FREE_TEXT_OPTION;
  free.textContent = 'Free text...';
  select.appendChild(free);
  wrap.appendChild(select);

  const freeInput = document.createElement('input');
  freeInput.className = 'free-text-input';
  freeInput.type = 'text';
  freeInput.placeholder = 'Ask in your own words';
  freeInput.hidden = true;
  wrap.appendChild(freeInput);

  const run = document.createElement('button');
  run.className = 'run-query';
  run.textContent = 'Run query';
  wrap.appendChild(run);
  return wrap;
}

export function renderBanner(response: QueryResponse): HTMLElement | null {
  if (!response.partial && response.provider_errors.length === 0) {
    return null;
  }
  const banner = document.createElement('div');
  banner.className = 'banner banner-warning';
  const providers = response.provider_errors.map((e) => e.provider).join(', ') || 'provider';
  banner.textContent = response.partial
    ? `Stance provider is down (${providers}); showing retrieval-only results. Feedback still works.`
    : `Degraded response from: ${providers}.`;
  return banner;
}

function renderBadge(item: EvidenceItem): HTMLElement | null {
  if (item.stance === null) {
    return null;
  }
  const badge = stanceBadge(item.stance.score);
  const el = document.createElement('span');
  if (!badge.ok) {
    el.className = 'badge badge-error';
    el.textContent = 'invalid stance score';
    el.title = badge.reason;
    return el;
  }
  el.className = `badge badge-${badge.polarity}`;
  el.dataset.score = String(badge.score);
  el.textContent = badge.label;
  return el;
}

function renderContext(item: EvidenceItem): HTMLElement {
  const p = document.createElement('p');
  p.className = 'evidence-context';
  if (item.context_before) {
    p.appendChild(document.createTextNode(item.context_before + ' '));
  }
  const mark = document.createElement('mark');
  mark.textContent = item.text;
  p.appendChild(mark);
  if (item.context_after) {
    p.appendChild(document.createTextNode(' ' + item.context_after));
  }
  return p;
}

function renderFeedbackControls(item: EvidenceItem, enabled: boolean): HTMLElement {
  const box = document.createElement('div');
  box.className = 'feedback-controls';

  for (const verdict of ['accept', 'reject'] as const) {
    const button = document.createElement('button');
    button.className = `feedback-${verdict}`;
    button.dataset.verdict = verdict;
    button.dataset.chunkId = item.chunk_id;
    button.textContent = verdict === 'accept' ? 'Accept' : 'Reject';
    button.disabled = !enabled;
    box.appendChild(button);
  }

  const picker = document.createElement('select');
  picker.className = 'stance-pick';
  picker.dataset.chunkId = item.chunk_id;
  for (const score of [-2, -1, 0, 1, 2]) {
    const option = document.createElement('option');
    const badge = stanceBadge(score);
    option.value = String(score);
    option.textContent = badge.ok ? `${score}: ${badge.label}` : String(score);
    if (item.stance && score === item.stance.score) {
      option.selected = true;
    }
    picker.appendChild(option);
  }
  box.appendChild(picker);

  const correct = document.createElement('button');
  correct.className = 'feedback-correct';
  correct.dataset.verdict = 'correct';
  correct.dataset.chunkId = item.chunk_id;
  correct.textContent = 'Correct to...';
  correct.disabled = !enabled;
  box.appendChild(correct);

  const status = document.createElement('span');
  status.className = 'feedback-status';
  box.appendChild(status);
  return box;
}

export function renderEvidenceCard(item: EvidenceItem, artifactId: string): HTMLElement {
  const card = document.createElement('article');
  card.className = 'evidence-card';
  card.dataset.chunkId = item.chunk_id;
  card.dataset.docId = item.doc_id;

  const header = document.createElement('header');
  const rank = document.createElement('span');
  rank.className = 'rank';
  rank.textContent = `#${item.rank}`;
  header.appendChild(rank);
  const badge = renderBadge(item);
  if (badge) {
    header.appendChild(badge);
  }
  const score = document.createElement('span');
  score.className = 'similarity';
  score.textContent = `score ${item.rerank_score.toFixed(3)}`;
  header.appendChild(score);
  card.appendChild(header);

  card.appendChild(renderContext(item));

  if (item.stance) {
    const reason = document.createElement('p');
    reason.className = 'reason';
    reason.textContent = item.stance.reason;
    card.appendChild(reason);
  }

  // controls stay usable whenever a query artifact exists, stance or not
  card.appendChild(renderFeedbackControls(item, Boolean(artifactId)));
  return card;
}

export function renderResults(response: QueryResponse): HTMLElement {
  const section = document.createElement('section');
  section.className = 'results';
  const banner = renderBanner(response);
  if (banner) {
    section.appendChild(banner);
  }
  if (response.results.length === 0) {
    const empty = document.createElement('p');
    empty.className = 'empty';
    empty.textContent = 'No evidence retrieved.';
    section.appendChild(empty);
  }
  for (const item of response.results) {
    section.appendChild(renderEvidenceCard(item, response.run_id));
  }
  return section;
}
