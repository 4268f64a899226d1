/**
 * Pure review-session logic: queue ordering, progress, verdict badges,
 * and local label bookkeeping. No DOM, no fetch; main.ts owns those.
 */
import type { LabelEntry, LabelValue, RecordRow } from './types.js';

export interface Progress {
  labeled: number;
  total: number;
  /** Whole-number percentage, 0 for an empty run. */
  percent: number;
}

export function progress(records: readonly RecordRow[]): Progress {
  const labeled = records.filter((r) => r.label !== null).length;
  const total = records.length;
  return {
    labeled,
    total,
    percent: total === 0 ? 0 : Math.round((labeled / total) * 100),
  };
}

/**
 * Review order: unlabeled records first, each group keeping corpus order.
 * The input is never mutated.
 */
export function reviewQueue(records: readonly RecordRow[]): RecordRow[] {
  const pending = records.filter((r) => r.label === null);
  const done = records.filter((r) => r.label !== null);
  return [...pending, ...done];
}

/** The next record to review after the given one, or null when all done. */
export function nextUnlabeled(
  records: readonly RecordRow[],
  afterId?: string,
): RecordRow | null {
  const pending = records.filter((r) => r.label === null && r.target_id !== afterId);
  return pending[0] ?? null;
}

export type Badge =
  | { kind: 'failed'; text: string }
  | { kind: 'refusal'; text: string }
  | { kind: 'unparsed'; text: string }
  | { kind: 'hit'; text: string }
  | { kind: 'miss'; text: string };

/** Compact verdict for a record row; failure states win over match states. */
export function badge(record: RecordRow): Badge {
  if (record.failed) {
    return { kind: 'failed', text: 'failed' };
  }
  if (record.refusal) {
    return { kind: 'refusal', text: 'refusal' };
  }
  if (record.match === null || record.match.kind === 'unparsed') {
    return { kind: 'unparsed', text: 'unparsed' };
  }
  if (record.match.matched) {
    return { kind: 'hit', text: `hit (${record.match.kind})` };
  }
  return { kind: 'miss', text: 'miss' };
}

/** New records array with the submitted label attached to its target. */
export function withLabel(
  records: readonly RecordRow[],
  label: LabelEntry,
): RecordRow[] {
  return records.map((r) =>
    r.target_id === label.target_id ? { ...r, label } : r,
  );
}

export interface LabelTally {
  total: number;
  counts: Record<LabelValue, number>;
  /** similar + different-appropriate over total, in [0, 1]; 0 when empty. */
  appropriateShare: number;
}

export function tallyLabels(records: readonly RecordRow[]): LabelTally {
  const counts: Record<LabelValue, number> = {
    'similar': 0,
    'different-appropriate': 0,
    'different-inappropriate': 0,
    'no-gesture': 0,
  };
  let total = 0;
  for (const record of records) {
    if (record.label !== null) {
      counts[record.label.value] += 1;
      total += 1;
    }
  }
  const appropriate = counts['similar'] + counts['different-appropriate'];
  return {
    total,
    counts,
    appropriateShare: total === 0 ? 0 : appropriate / total,
  };
}
