/**
 * Typed client for the review API.
 *
 * Server errors arrive as `{"error": {"code", "message"}}`; they are
 * rethrown as ApiError so callers can branch on the code. The one that
 * matters for the UI is `label-conflict` (409): the target already has a
 * final label and a resubmission must set `adjudicated`.
 */
import type {
  Corpus,
  LabelEntry,
  LabelSubmission,
  RunRecords,
  RunReport,
  RunSummary,
} from './types.js';

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = 'ApiError';
    this.status = status;
    this.code = code;
  }
}

/** True when a label submission was rejected because a final label exists. */
export function isLabelConflict(err: unknown): err is ApiError {
  return err instanceof ApiError && err.code === 'label-conflict';
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(path, init);
  if (!res.ok) {
    let code = `http-${res.status}`;
    let message = res.statusText;
    try {
      const body = (await res.json()) as { error?: { code?: string; message?: string } };
      if (body.error) {
        code = body.error.code ?? code;
        message = body.error.message ?? message;
      }
    } catch {
      // non-JSON error body, keep the status fallback
    }
    throw new ApiError(res.status, code, message);
  }
  return res.json() as Promise<T>;
}

export async function fetchCorpus(): Promise<Corpus> {
  return request<Corpus>('/api/corpus');
}

export async function fetchRuns(): Promise<RunSummary[]> {
  const doc = await request<{ runs: RunSummary[] }>('/api/runs');
  return doc.runs;
}

export async function fetchRecords(runId: string): Promise<RunRecords> {
  return request<RunRecords>(`/api/runs/${encodeURIComponent(runId)}/records`);
}

export async function fetchReport(runId: string): Promise<RunReport> {
  return request<RunReport>(`/api/runs/${encodeURIComponent(runId)}/report`);
}

export async function submitLabel(
  runId: string,
  submission: LabelSubmission,
): Promise<LabelEntry> {
  const doc = await request<{ run_id: string; label: LabelEntry }>(
    `/api/runs/${encodeURIComponent(runId)}/labels`,
    {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(submission),
    },
  );
  return doc.label;
}
