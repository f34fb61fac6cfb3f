/** Stance badge rendering rules: score to rubric label and polarity class. */

export type Polarity = 'negative' | 'neutral' | 'positive';

export type BadgeView =
  | { ok: true; score: number; label: string; polarity: Polarity }
  | { ok: false; reason: string };

const RUBRIC: Record<number, { label: string; polarity: Polarity }> = {
  [-2]: { label: 'Opposes', polarity: 'negative' },
  [-1]: { label: 'Unsupportive/major caveats', polarity: 'negative' },
  [0]: { label: 'Unclear/mixed', polarity: 'neutral' },
  [1]: { label: 'Broad support', polarity: 'positive' },
  [2]: { label: 'Strong support', polarity: 'positive' },
};

/**
 * Map a stance score to its badge. Scores outside -2..2 (or non-integers)
 * yield an explicit error state; the UI never fabricates a label.
 */
export function stanceBadge(score: number): BadgeView {
  if (!Number.isInteger(score) || score < -2 || score > 2) {
    return { ok: false, reason: `score ${score} outside -2..2` };
  }
  const entry = RUBRIC[score];
  return { ok: true, score, label: entry.label, polarity: entry.polarity };
}
