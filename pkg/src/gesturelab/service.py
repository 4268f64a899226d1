"""HTTP API for browsing runs and collecting appropriateness labels.

Read endpoints expose the corpus, run manifests, joined per-target records,
and computed reports. The one write endpoint accepts a human
appropriateness label per (run, target). The first label for a target is
final; a second submission conflicts unless it is flagged as an
adjudication, in which case it replaces the label and the old one moves
into the entry's history.

Errors use one JSON shape: {"error": {"code": ..., "message": ...}}.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .corpus import Corpus, corpus_to_mapping
from .errors import (
    DuplicateFinalLabelError,
    EmptyRunError,
    ManifestCorruptError,
    ParseError,
)
from .evaluate import (
    AppropriatenessValue,
    evaluate_run,
    summarize_appropriateness,
)
from .normalize import (
    ScoringPolicy,
    default_config,
    parse_suggestion,
    predicted_category,
    score_suggestion,
)
from .prompts import SpecLevel, render_label
from .runner import list_run_dirs, load_run_manifest, load_run_records


class LabelSubmission(BaseModel):
    target_id: str
    value: str
    rater: str
    note: str = ""
    adjudicated: bool = False


class LabelStore:
    """Per-run label file with final-label semantics.

    Labels live in <run_dir>/labels.json. Writes go through a lock and a
    temp-file rename so a crashed request cannot leave a torn file.
    """

    def __init__(self, run_dir: Path):
        self.path = run_dir / "labels.json"
        self._lock = threading.Lock()

    def _load(self) -> dict:
        if not self.path.is_file():
            return {"labels": {}}
        return json.loads(self.path.read_text(encoding="utf-8"))

    def get_all(self) -> dict[str, dict]:
        return self._load()["labels"]

    def get(self, target_id: str) -> dict | None:
        return self._load()["labels"].get(target_id)

    def submit(self, submission: LabelSubmission) -> dict:
        value = AppropriatenessValue.parse(submission.value)
        with self._lock:
            doc = self._load()
            existing = doc["labels"].get(submission.target_id)
            entry = {
                "target_id": submission.target_id,
                "value": value.value,
                "rater": submission.rater,
                "note": submission.note,
                "adjudicated": submission.adjudicated,
                "history": [],
            }
            if existing is not None:
                if not submission.adjudicated:
                    raise DuplicateFinalLabelError(
                        f"target {submission.target_id!r} already has a final label"
                    )
                history = existing.pop("history", [])
                history.append(existing)
                entry["history"] = history
            doc["labels"][submission.target_id] = entry
            tmp = self.path.with_suffix(".tmp")
            tmp.write_text(
                json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            tmp.replace(self.path)
            return entry


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


def _truth_labels(annotation) -> dict:
    return {level.value: render_label(annotation, level) for level in SpecLevel}


def create_app(out_dir: str | Path, corpus: Corpus) -> FastAPI:
    out = Path(out_dir)
    app = FastAPI(title="gesture suggestion review")
    config = default_config()

    def run_dir_for(run_id: str) -> Path | None:
        candidate = out / "runs" / run_id
        if (candidate / "manifest").is_file():
            return candidate
        return None

    @app.exception_handler(DuplicateFinalLabelError)
    async def _conflict(request: Request, exc: DuplicateFinalLabelError):
        return _error(409, "label-conflict", str(exc))

    @app.exception_handler(ParseError)
    async def _bad_value(request: Request, exc: ParseError):
        return _error(400, "bad-value", str(exc))

    @app.exception_handler(ManifestCorruptError)
    async def _corrupt(request: Request, exc: ManifestCorruptError):
        return _error(500, "corrupt-run", str(exc))

    @app.get("/api/corpus")
    def get_corpus() -> dict:
        return corpus_to_mapping(corpus)

    @app.get("/api/runs")
    def get_runs() -> dict:
        manifests = []
        for run_dir in list_run_dirs(out):
            manifest = load_run_manifest(run_dir)
            store = LabelStore(run_dir)
            manifest["n_labels"] = len(store.get_all())
            manifests.append(manifest)
        return {"runs": manifests}

    @app.get("/api/runs/{run_id}/records")
    def get_records(run_id: str):
        run_dir = run_dir_for(run_id)
        if run_dir is None:
            return _error(404, "unknown-run", f"no run named {run_id!r}")
        manifest = load_run_manifest(run_dir)
        level = SpecLevel.parse(manifest["level"])
        labels = LabelStore(run_dir).get_all()
        rows = []
        for record in load_run_records(run_dir):
            annotation = corpus.get(record.target_id)
            if annotation is None:
                return _error(
                    500,
                    "corrupt-run",
                    f"record target {record.target_id!r} is not in the corpus",
                )
            row: dict = {
                "target_id": record.target_id,
                "output_text": record.output_text,
                "refusal": record.refusal,
                "failed": record.failed,
                "error": record.error,
                "truth": {
                    "segment_text": annotation.segment_text,
                    "trigger_phrase": annotation.trigger_phrase,
                    "labels": _truth_labels(annotation),
                },
                "label": labels.get(record.target_id),
            }
            if not record.failed and record.output_text is not None:
                outcome = parse_suggestion(record.output_text, config)
                result = score_suggestion(
                    outcome, annotation, level, ScoringPolicy.FIRST_ONLY, config
                )
                predicted = predicted_category(outcome)
                row["match"] = {
                    "matched": result.matched,
                    "kind": result.kind.value,
                    "predicted_category": predicted.value if predicted else None,
                }
            else:
                row["match"] = None
            rows.append(row)
        return {"run_id": run_id, "level": level.value, "plan": manifest["plan"], "records": rows}

    @app.get("/api/runs/{run_id}/report")
    def get_report(run_id: str):
        run_dir = run_dir_for(run_id)
        if run_dir is None:
            return _error(404, "unknown-run", f"no run named {run_id!r}")
        manifest = load_run_manifest(run_dir)
        level = SpecLevel.parse(manifest["level"])
        records = load_run_records(run_dir)
        doc: dict = {"run_id": run_id, "manifest": manifest}
        try:
            doc["evaluations"] = [
                evaluate_run(records, corpus, level, policy, config).to_mapping()
                for policy in ScoringPolicy
            ]
        except EmptyRunError as exc:
            doc["evaluations"] = []
            doc["note"] = str(exc)
        labels = LabelStore(run_dir).get_all()
        if labels:
            summary = summarize_appropriateness(
                AppropriatenessValue.parse(entry["value"]) for entry in labels.values()
            )
            doc["appropriateness"] = summary.to_mapping()
        return doc

    @app.post("/api/runs/{run_id}/labels")
    def post_label(run_id: str, submission: LabelSubmission):
        run_dir = run_dir_for(run_id)
        if run_dir is None:
            return _error(404, "unknown-run", f"no run named {run_id!r}")
        if submission.target_id not in corpus:
            return _error(
                404, "unknown-target", f"no annotation with id {submission.target_id!r}"
            )
        entry = LabelStore(run_dir).submit(submission)
        return {"run_id": run_id, "label": entry}

    return app


def mount_static(app: FastAPI, static_dir: str | Path) -> None:
    """Serve a built single-page frontend alongside the API."""
    from fastapi.staticfiles import StaticFiles

    app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="static")
