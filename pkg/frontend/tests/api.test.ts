import { afterEach, describe, expect, it, vi } from 'vitest';

import {
  ApiError,
  fetchCorpus,
  fetchRecords,
  fetchReport,
  fetchRuns,
  isLabelConflict,
  submitLabel,
} from '../src/api.js';

function jsonResponse(status: number, body: unknown) {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: `status ${status}`,
    json: async () => body,
  };
}

function stubFetch(status: number, body: unknown) {
  const mock = vi.fn(async () => jsonResponse(status, body));
  vi.stubGlobal('fetch', mock);
  return mock;
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe('request paths', () => {
  it('fetches the corpus', async () => {
    const mock = stubFetch(200, { name: 'c', version: '1', context_statement: '', annotations: [] });
    const corpus = await fetchCorpus();
    expect(mock).toHaveBeenCalledWith('/api/corpus', undefined);
    expect(corpus.name).toBe('c');
  });

  it('unwraps the runs array', async () => {
    const mock = stubFetch(200, { runs: [{ run_id: 'r1' }, { run_id: 'r2' }] });
    const runs = await fetchRuns();
    expect(mock).toHaveBeenCalledWith('/api/runs', undefined);
    expect(runs.map((r) => r.run_id)).toEqual(['r1', 'r2']);
  });

  it('encodes run ids into record and report paths', async () => {
    const mock = stubFetch(200, { run_id: 'a/b', level: 'category', plan: 'k2', records: [] });
    await fetchRecords('a/b');
    expect(mock).toHaveBeenLastCalledWith('/api/runs/a%2Fb/records', undefined);
    await fetchReport('a/b');
    expect(mock).toHaveBeenLastCalledWith('/api/runs/a%2Fb/report', undefined);
  });
});

describe('submitLabel', () => {
  it('posts the submission as JSON and returns the stored entry', async () => {
    const entry = {
      target_id: 't1',
      value: 'similar',
      rater: 'r',
      note: '',
      adjudicated: false,
      history: [],
    };
    const mock = stubFetch(200, { run_id: 'run', label: entry });
    const got = await submitLabel('run', { target_id: 't1', value: 'similar', rater: 'r' });
    expect(got).toEqual(entry);
    const [path, init] = mock.mock.calls[0] as unknown as [string, RequestInit];
    expect(path).toBe('/api/runs/run/labels');
    expect(init.method).toBe('POST');
    expect(init.headers).toEqual({ 'Content-Type': 'application/json' });
    expect(JSON.parse(init.body as string)).toEqual({
      target_id: 't1',
      value: 'similar',
      rater: 'r',
    });
  });

  it('carries the adjudicated flag through the body', async () => {
    const mock = stubFetch(200, { run_id: 'run', label: {} });
    await submitLabel('run', {
      target_id: 't1',
      value: 'no-gesture',
      rater: 'lead',
      adjudicated: true,
    });
    const [, init] = mock.mock.calls[0] as unknown as [string, RequestInit];
    expect(JSON.parse(init.body as string).adjudicated).toBe(true);
  });
});

describe('error mapping', () => {
  it('rethrows wire errors as ApiError with their code', async () => {
    stubFetch(409, {
      error: { code: 'label-conflict', message: "target 't1' already has a final label" },
    });
    const err = await submitLabel('run', {
      target_id: 't1',
      value: 'similar',
      rater: 'r',
    }).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).code).toBe('label-conflict');
    expect((err as ApiError).message).toContain('final label');
    expect(isLabelConflict(err)).toBe(true);
  });

  it('falls back to the status when the error body is not JSON', async () => {
    vi.stubGlobal(
      'fetch',
      vi.fn(async () => ({
        ok: false,
        status: 502,
        statusText: 'Bad Gateway',
        json: async () => {
          throw new SyntaxError('not json');
        },
      })),
    );
    const err = await fetchRuns().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe('http-502');
    expect((err as ApiError).message).toBe('Bad Gateway');
    expect(isLabelConflict(err)).toBe(false);
  });

  it('does not flag other ApiErrors as conflicts', () => {
    expect(isLabelConflict(new ApiError(404, 'unknown-run', 'nope'))).toBe(false);
    expect(isLabelConflict(new Error('plain'))).toBe(false);
  });
});
