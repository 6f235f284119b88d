/** View-model helpers: pure functions from service documents to render data. */

import type {
  Attempt,
  CriterionEntry,
  FeedbackReport,
  LengthConstraint,
  ReportItem,
} from "./api.js";

/** Number of Unicode scalar values in the text (not UTF-16 code units). */
export function scalarLength(text: string): number {
  let count = 0;
  for (const _ of text) count += 1;
  return count;
}

/**
 * Convert a scalar offset into a UTF-16 code-unit index.
 *
 * Service spans count code points, JavaScript strings count code units;
 * astral characters occupy two units, so the two scales diverge.
 * Offsets beyond the end clamp to the end of the string.
 */
export function scalarToUtf16(text: string, scalarOffset: number): number {
  if (scalarOffset <= 0) return 0;
  let seen = 0;
  let index = 0;
  for (const ch of text) {
    if (seen === scalarOffset) return index;
    seen += 1;
    index += ch.length;
  }
  return text.length;
}

export interface HighlightParts {
  before: string;
  cue: string;
  after: string;
}

/** Split text around a half-open [start, end) span given in scalar offsets. */
export function splitForHighlight(text: string, span: [number, number]): HighlightParts {
  const [start, end] = span;
  const lo = scalarToUtf16(text, Math.min(start, end));
  const hi = scalarToUtf16(text, Math.max(start, end));
  return {
    before: text.slice(0, lo),
    cue: text.slice(lo, hi),
    after: text.slice(hi),
  };
}

export interface LengthState {
  count: number;
  min: number | null;
  max: number | null;
  ok: boolean;
}

/** Scalar count plus whether it satisfies the prompt's length bounds. */
export function lengthState(text: string, constraint: LengthConstraint | null): LengthState {
  const count = scalarLength(text);
  if (constraint === null) {
    return { count, min: null, max: null, ok: count > 0 };
  }
  return {
    count,
    min: constraint.min_chars,
    max: constraint.max_chars,
    ok: count >= constraint.min_chars && count <= constraint.max_chars,
  };
}

export interface FeedbackCard {
  criterionId: string;
  templateKey: string;
  text: string;
  scoreFraction: string;
  aligned: boolean;
  /** Parts of the attempt text around the cue, or null when no span exists. */
  highlight: HighlightParts | null;
}

/**
 * One card per report item, in report order.
 *
 * The highlight comes from the attempt's per-criterion cue span applied to
 * the attempt text; items without a span render without a highlight.
 */
export function buildFeedbackCards(report: FeedbackReport, attempt: Attempt): FeedbackCard[] {
  return report.items.map((item: ReportItem) => {
    const entry: CriterionEntry | undefined = attempt.per_criterion[item.criterion_id];
    const span = entry?.cue_span ?? null;
    return {
      criterionId: item.criterion_id,
      templateKey: item.template_key,
      text: item.rendered_text,
      scoreFraction: `${item.score}/${item.max_score}`,
      aligned: item.alignment?.aligned ?? false,
      highlight: span === null ? null : splitForHighlight(attempt.text, span),
    };
  });
}

export interface HistoryRow {
  index: number;
  submittedAt: string;
  total: number;
  /** Service-computed delta, formatted; "n/a" for the first attempt. */
  deltaLabel: string;
}

export function formatDelta(delta: number | null): string {
  if (delta === null) return "n/a";
  if (delta > 0) return `+${delta}`;
  return String(delta);
}

/** One row per attempt, oldest first, deltas taken from the service verbatim. */
export function buildHistory(attempts: Attempt[]): HistoryRow[] {
  return attempts.map((attempt) => ({
    index: attempt.index,
    submittedAt: attempt.submitted_at,
    total: attempt.total_score,
    deltaLabel: formatDelta(attempt.delta),
  }));
}

/** Non-empty lines of the prompt body, in order. */
export function paragraphs(promptText: string): string[] {
  return promptText.split("\n").filter((line) => line.trim() !== "");
}
