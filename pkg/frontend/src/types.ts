/**
 * Wire types for the review API.
 *
 * Shapes mirror the JSON served under /api exactly; optional fields are
 * optional on the wire too (a report carries `appropriateness` only once
 * at least one label exists).
 */

export type SpecLevel = 'category' | 'physical' | 'semantic-gesture' | 'semantic-only';

export type LabelValue =
  | 'similar'
  | 'different-appropriate'
  | 'different-inappropriate'
  | 'no-gesture';

export const LABEL_VALUES: readonly LabelValue[] = [
  'similar',
  'different-appropriate',
  'different-inappropriate',
  'no-gesture',
];

export interface Annotation {
  id: string;
  segment_text: string;
  trigger_phrase: string;
  category: string;
  palm_orientation: string | null;
  semantic_descriptor: string;
  speaker: string;
  context: string;
}

export interface Corpus {
  name: string;
  version: string;
  context_statement: string;
  annotations: Annotation[];
}

export interface RunSummary {
  run_id: string;
  corpus_name: string;
  corpus_version: string;
  model_name: string;
  level: SpecLevel;
  plan: string;
  ordering: string;
  seed: number;
  n_targets: number;
  n_labels: number;
}

export interface LabelEntry {
  target_id: string;
  value: LabelValue;
  rater: string;
  note: string;
  adjudicated: boolean;
  history: Omit<LabelEntry, 'history'>[];
}

export interface MatchVerdict {
  matched: boolean;
  kind: 'exact' | 'semantic-prefix' | 'compound-any' | 'none' | 'unparsed';
  predicted_category: string | null;
}

export interface RecordRow {
  target_id: string;
  output_text: string;
  refusal: boolean;
  failed: boolean;
  error: string | null;
  truth: {
    segment_text: string;
    trigger_phrase: string;
    labels: Record<SpecLevel, string>;
  };
  label: LabelEntry | null;
  match: MatchVerdict | null;
}

export interface RunRecords {
  run_id: string;
  level: SpecLevel;
  plan: string;
  records: RecordRow[];
}

/** Exact rational plus its three-decimal display form. */
export interface RatioValue {
  fraction: string;
  value: string;
}

export interface Evaluation {
  level: SpecLevel;
  policy: 'first-only' | 'any-candidate';
  n_records: number;
  n_scored: number;
  n_hits: number;
  n_refusals: number;
  n_failed: number;
  n_unparsed: number;
  accuracy: RatioValue;
  chance: RatioValue;
  lift: string;
  match_kinds: Record<string, number>;
  confusion: {
    rows: string[];
    cols: string[];
    counts: Record<string, Record<string, number>>;
  } | null;
}

export interface Appropriateness {
  total: number;
  counts: Record<LabelValue, number>;
  percent: Record<LabelValue, string>;
  appropriate_percent: string;
}

export interface RunReport {
  run_id: string;
  manifest: Omit<RunSummary, 'n_labels'>;
  evaluations: Evaluation[];
  note?: string;
  appropriateness?: Appropriateness;
}

export interface LabelSubmission {
  target_id: string;
  value: LabelValue;
  rater: string;
  note?: string;
  adjudicated?: boolean;
}
