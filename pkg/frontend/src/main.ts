/**
 * DOM wiring for the review UI. Served by the experiment API process
 * (`gesturelab serve --static frontend/dist`), so all fetches are
 * same-origin.
 */
import { fetchRecords, fetchReport, fetchRuns, isLabelConflict, submitLabel } from './api.js';
import { badge, nextUnlabeled, progress, reviewQueue, tallyLabels, withLabel } from './state.js';
import type { LabelValue, RecordRow, RunReport, RunSummary } from './types.js';
import { LABEL_VALUES } from './types.js';

let runs: RunSummary[] = [];
let currentRunId: string | null = null;
let records: RecordRow[] = [];
let selectedId: string | null = null;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
};

function setStatus(text: string, isError = false): void {
  const el = $('status');
  el.textContent = text;
  el.classList.toggle('error', isError);
}

async function init(): Promise<void> {
  try {
    runs = await fetchRuns();
  } catch (err) {
    setStatus(`could not load runs: ${String(err)}`, true);
    return;
  }
  const select = $<HTMLSelectElement>('run-select');
  select.innerHTML = '';
  for (const run of runs) {
    const option = document.createElement('option');
    option.value = run.run_id;
    option.textContent = `${run.level} / ${run.plan} (${run.n_labels}/${run.n_targets} labeled)`;
    select.appendChild(option);
  }
  select.addEventListener('change', () => void selectRun(select.value));
  $('refresh').addEventListener('click', () => void init());
  const first = runs[0];
  if (first) {
    select.value = currentRunId ?? first.run_id;
    await selectRun(select.value);
  } else {
    setStatus('no runs in the experiment directory');
  }
}

async function selectRun(runId: string): Promise<void> {
  currentRunId = runId;
  setStatus('loading records');
  try {
    const doc = await fetchRecords(runId);
    records = doc.records;
  } catch (err) {
    setStatus(`could not load records: ${String(err)}`, true);
    return;
  }
  const next = nextUnlabeled(records);
  selectedId = next ? next.target_id : (records[0]?.target_id ?? null);
  renderAll();
  void renderReport(runId);
  setStatus('');
}

function renderAll(): void {
  renderProgress();
  renderList();
  renderDetail();
}

function renderProgress(): void {
  const p = progress(records);
  $('progress-text').textContent = `${p.labeled} / ${p.total} labeled`;
  $('progress-fill').style.width = `${p.percent}%`;
}

function renderList(): void {
  const list = $('record-list');
  list.innerHTML = '';
  for (const record of reviewQueue(records)) {
    const row = document.createElement('li');
    row.classList.toggle('selected', record.target_id === selectedId);
    row.classList.toggle('labeled', record.label !== null);
    const verdict = badge(record);
    row.innerHTML = `
      <span class="target">${record.target_id}</span>
      <span class="badge ${verdict.kind}">${verdict.text}</span>
      <span class="label-mark">${record.label ? record.label.value : ''}</span>`;
    row.addEventListener('click', () => {
      selectedId = record.target_id;
      renderAll();
    });
    list.appendChild(row);
  }
}

function highlightTrigger(segment: string, trigger: string): string {
  const at = segment.indexOf(trigger);
  if (at < 0) {
    return escapeHtml(segment);
  }
  const before = escapeHtml(segment.slice(0, at));
  const mid = escapeHtml(trigger);
  const after = escapeHtml(segment.slice(at + trigger.length));
  return `${before}<mark>${mid}</mark>${after}`;
}

function escapeHtml(text: string): string {
  const div = document.createElement('div');
  div.textContent = text;
  return div.innerHTML;
}

function renderDetail(): void {
  const panel = $('detail');
  const record = records.find((r) => r.target_id === selectedId);
  if (!record) {
    panel.innerHTML = '<p class="hint">Select a record.</p>';
    return;
  }
  const verdict = badge(record);
  const truthRows = Object.entries(record.truth.labels)
    .map(([level, label]) => `<tr><td>${level}</td><td>${escapeHtml(label)}</td></tr>`)
    .join('');
  panel.innerHTML = `
    <h2>${record.target_id} <span class="badge ${verdict.kind}">${verdict.text}</span></h2>
    <p class="segment">${highlightTrigger(record.truth.segment_text, record.truth.trigger_phrase)}</p>
    <dl>
      <dt>model suggestion</dt>
      <dd class="output">${record.failed ? `<em>failed: ${escapeHtml(record.error ?? '')}</em>` : escapeHtml(record.output_text) || '<em>(empty)</em>'}</dd>
    </dl>
    <table class="truth"><tbody>${truthRows}</tbody></table>
    <div id="label-box"></div>`;
  renderLabelBox(record);
}

function renderLabelBox(record: RecordRow): void {
  const box = $('label-box');
  if (record.label) {
    const history = record.label.history.length
      ? `<p class="hint">replaced ${record.label.history.length} earlier label(s)</p>`
      : '';
    box.innerHTML = `
      <p>labeled <strong>${record.label.value}</strong> by ${escapeHtml(record.label.rater)}
      ${record.label.adjudicated ? '(adjudicated)' : ''}</p>${history}
      <p class="hint">submit again to adjudicate a replacement</p>`;
  } else {
    box.innerHTML = '';
  }
  const form = document.createElement('div');
  form.className = 'label-form';
  for (const value of LABEL_VALUES) {
    const button = document.createElement('button');
    button.textContent = value;
    button.addEventListener('click', () => void sendLabel(record, value));
    form.appendChild(button);
  }
  box.appendChild(form);
}

async function sendLabel(record: RecordRow, value: LabelValue): Promise<void> {
  if (!currentRunId) {
    return;
  }
  const rater = $<HTMLInputElement>('rater').value.trim();
  if (!rater) {
    setStatus('enter a rater name first', true);
    return;
  }
  const note = $<HTMLInputElement>('note').value.trim();
  const submission = { target_id: record.target_id, value, rater, note };
  try {
    const entry = await submitLabel(currentRunId, submission);
    records = withLabel(records, entry);
  } catch (err) {
    if (isLabelConflict(err)) {
      const replace = window.confirm(
        `"${record.target_id}" already has a final label. Replace it (adjudicate)?`,
      );
      if (!replace) {
        return;
      }
      const entry = await submitLabel(currentRunId, { ...submission, adjudicated: true });
      records = withLabel(records, entry);
    } else {
      setStatus(`label rejected: ${String(err)}`, true);
      return;
    }
  }
  setStatus('');
  const next = nextUnlabeled(records, record.target_id);
  selectedId = next ? next.target_id : record.target_id;
  renderAll();
  void renderReport(currentRunId);
}

function evaluationRows(report: RunReport): string {
  return report.evaluations
    .map(
      (ev) => `
      <tr>
        <td>${ev.policy}</td>
        <td>${ev.n_hits}/${ev.n_scored}</td>
        <td>${ev.accuracy.value}</td>
        <td>${ev.chance.value}</td>
        <td>${ev.lift}</td>
      </tr>`,
    )
    .join('');
}

async function renderReport(runId: string): Promise<void> {
  const panel = $('report');
  let report: RunReport;
  try {
    report = await fetchReport(runId);
  } catch (err) {
    panel.innerHTML = `<p class="error">report unavailable: ${String(err)}</p>`;
    return;
  }
  const tally = tallyLabels(records);
  const appropriateness = report.appropriateness
    ? `<p>appropriate: <strong>${report.appropriateness.appropriate_percent}</strong>
       of ${report.appropriateness.total} labels</p>`
    : `<p class="hint">no labels yet (${tally.total} pending locally)</p>`;
  panel.innerHTML = `
    <h2>${report.manifest.level} / ${report.manifest.plan}</h2>
    ${report.note ? `<p class="hint">${escapeHtml(report.note)}</p>` : ''}
    <table>
      <thead><tr><th>policy</th><th>hits</th><th>accuracy</th><th>chance</th><th>lift</th></tr></thead>
      <tbody>${evaluationRows(report)}</tbody>
    </table>
    ${appropriateness}`;
}

document.addEventListener('DOMContentLoaded', () => void init());
