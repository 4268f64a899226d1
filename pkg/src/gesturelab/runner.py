"""Batch suggestion runs over a corpus.

A run asks one model for a gesture suggestion for every annotation in a
corpus, under one prompt recipe (specification level plus example plan).
An experiment is the cross product of levels and plans. Results land on
disk, one JSON record per target:

    <out>/manifest
    <out>/runs/<run_id>/manifest
    <out>/runs/<run_id>/records/<target_id>

Record and manifest bytes are pure functions of the run inputs and the
model's replies: no timestamps, latency, provider kind, or cache-hit flags.
Re-running against a warm cache reproduces every file byte for byte, which
is what makes recorded experiments auditable.

Run ids hash the run inputs (corpus identity, model name, level, plan,
ordering, seed) so the same recipe always lands in the same directory.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .corpus import Corpus
from .errors import (
    ConfigError,
    ExperimentError,
    GatewayError,
    ManifestCorruptError,
    ProviderRefusalError,
)
from .gateway import ModelGateway
from .prompts import (
    ExampleOrdering,
    ExamplePlan,
    PromptBundle,
    PromptTemplates,
    SpecLevel,
    build_fewshot,
    build_zeroshot,
)

ZEROSHOT_PLAN = "zeroshot"
DEFAULT_PLANS = ("k2", "k4", "k6", "loo", ZEROSHOT_PLAN)
DEFAULT_CONCURRENCY = 4

CompleteFn = Callable[[str], str]


def parse_plan(label: str, seed: int = 0, ordering: ExampleOrdering = ExampleOrdering.CORPUS_ORDER) -> ExamplePlan | None:
    """Plan labels: k<N> for N examples per category, loo, zeroshot."""
    label = label.strip().lower()
    if label == ZEROSHOT_PLAN:
        return None
    if label == "loo":
        return ExamplePlan.leave_one_out(seed=seed, ordering=ordering)
    if label.startswith("k"):
        try:
            k = int(label[1:])
        except ValueError:
            raise ConfigError(f"unknown example plan: {label!r}") from None
        return ExamplePlan.per_category(k, seed=seed, ordering=ordering)
    raise ConfigError(f"unknown example plan: {label!r}")


def derive_run_id(
    corpus: Corpus,
    model_name: str,
    level: SpecLevel,
    plan_label: str,
    ordering: ExampleOrdering,
    seed: int,
) -> str:
    key = json.dumps(
        {
            "corpus": [corpus.name, corpus.version],
            "model": model_name,
            "level": level.value,
            "plan": plan_label,
            "ordering": ordering.value,
            "seed": seed,
        },
        sort_keys=True,
    )
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()[:10]
    return f"{level.value}-{plan_label}-{digest}"


@dataclass(frozen=True)
class RunSpec:
    corpus: Corpus
    model_name: str
    level: SpecLevel
    plan_label: str
    ordering: ExampleOrdering = ExampleOrdering.CORPUS_ORDER
    seed: int = 0
    templates: PromptTemplates | None = None

    @property
    def run_id(self) -> str:
        return derive_run_id(
            self.corpus,
            self.model_name,
            self.level,
            self.plan_label,
            self.ordering,
            self.seed,
        )

    def build_prompt(self, target_id: str) -> PromptBundle:
        templates = self.templates or PromptTemplates()
        plan = parse_plan(self.plan_label, seed=self.seed, ordering=self.ordering)
        if plan is None:
            return build_zeroshot(self.corpus, target_id, templates)
        return build_fewshot(self.corpus, target_id, self.level, plan, templates)

    def manifest_mapping(self) -> dict:
        return {
            "run_id": self.run_id,
            "corpus_name": self.corpus.name,
            "corpus_version": self.corpus.version,
            "model_name": self.model_name,
            "level": self.level.value,
            "plan": self.plan_label,
            "ordering": self.ordering.value,
            "seed": self.seed,
            "n_targets": len(self.corpus.annotations),
        }


@dataclass(frozen=True)
class SuggestionRecord:
    """One model reply for one target. Refusals are data; failures are not."""

    target_id: str
    prompt_sha256: str
    model_name: str
    example_ids: tuple[str, ...]
    output_text: str | None
    refusal: bool
    failed: bool
    error: str | None

    def to_mapping(self) -> dict:
        return {
            "target_id": self.target_id,
            "prompt_sha256": self.prompt_sha256,
            "model_name": self.model_name,
            "example_ids": list(self.example_ids),
            "output_text": self.output_text,
            "refusal": self.refusal,
            "failed": self.failed,
            "error": self.error,
        }

    @classmethod
    def from_mapping(cls, doc: dict) -> "SuggestionRecord":
        return cls(
            target_id=doc["target_id"],
            prompt_sha256=doc["prompt_sha256"],
            model_name=doc["model_name"],
            example_ids=tuple(doc["example_ids"]),
            output_text=doc["output_text"],
            refusal=doc["refusal"],
            failed=doc["failed"],
            error=doc["error"],
        )


def _dump_json(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2) + "\n").encode(
        "utf-8"
    )


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class RunResult:
    run_id: str
    run_dir: Path
    n_ok: int
    n_refusals: int
    n_failed: int
    n_skipped: int


def _fetch_one(
    spec: RunSpec, target_id: str, complete_fn: CompleteFn
) -> SuggestionRecord:
    prompt = spec.build_prompt(target_id)
    prompt_sha = hashlib.sha256(prompt.rendered.encode("utf-8")).hexdigest()
    try:
        text = complete_fn(prompt.rendered)
    except ProviderRefusalError as exc:
        return SuggestionRecord(
            target_id=target_id,
            prompt_sha256=prompt_sha,
            model_name=spec.model_name,
            example_ids=prompt.example_ids,
            output_text=None,
            refusal=True,
            failed=False,
            error=str(exc),
        )
    except GatewayError as exc:
        return SuggestionRecord(
            target_id=target_id,
            prompt_sha256=prompt_sha,
            model_name=spec.model_name,
            example_ids=prompt.example_ids,
            output_text=None,
            refusal=False,
            failed=True,
            error=f"{type(exc).__name__}: {exc}",
        )
    return SuggestionRecord(
        target_id=target_id,
        prompt_sha256=prompt_sha,
        model_name=spec.model_name,
        example_ids=prompt.example_ids,
        output_text=text,
        refusal=False,
        failed=False,
        error=None,
    )


def run_suggestions(
    spec: RunSpec,
    out_dir: str | Path,
    gateway: ModelGateway | None = None,
    complete_fn: CompleteFn | None = None,
    concurrency: int = DEFAULT_CONCURRENCY,
    resume: bool = False,
) -> RunResult:
    """Execute one run, writing records under <out_dir>/runs/<run_id>/.

    With resume, existing healthy records (including refusals) are kept and
    only missing or failed targets are attempted again. A run where nothing
    succeeds raises rather than leaving a silently useless directory.
    """
    if concurrency < 1:
        raise ConfigError("concurrency must be >= 1")
    if complete_fn is None:
        if gateway is None:
            raise ConfigError("run_suggestions needs a gateway or a complete_fn")
        complete_fn = lambda prompt: gateway.complete(prompt).text
    run_dir = Path(out_dir) / "runs" / spec.run_id
    records_dir = run_dir / "records"
    manifest_path = run_dir / "manifest"

    if manifest_path.is_file():
        try:
            existing = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ManifestCorruptError(f"{manifest_path}: {exc}") from None
        if existing.get("run_id") != spec.run_id:
            raise ManifestCorruptError(
                f"{manifest_path}: manifest belongs to run {existing.get('run_id')!r}"
            )
        if not resume:
            raise ConfigError(
                f"run {spec.run_id} already exists at {run_dir}; pass resume to continue"
            )
    _write_atomic(manifest_path, _dump_json(spec.manifest_mapping()))

    todo: list[str] = []
    n_skipped = 0
    for ann in spec.corpus.annotations:
        record_path = records_dir / ann.id
        if resume and record_path.is_file():
            doc = json.loads(record_path.read_text(encoding="utf-8"))
            if not doc.get("failed", False):
                n_skipped += 1
                continue
        todo.append(ann.id)

    n_ok = n_refusals = n_failed = 0
    if todo:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            for record in pool.map(
                lambda tid: _fetch_one(spec, tid, complete_fn), todo
            ):
                _write_atomic(records_dir / record.target_id, _dump_json(record.to_mapping()))
                if record.failed:
                    n_failed += 1
                elif record.refusal:
                    n_refusals += 1
                else:
                    n_ok += 1
    if n_ok + n_refusals + n_skipped == 0:
        raise ExperimentError(f"run {spec.run_id}: no target produced a usable record")
    return RunResult(
        run_id=spec.run_id,
        run_dir=run_dir,
        n_ok=n_ok,
        n_refusals=n_refusals,
        n_failed=n_failed,
        n_skipped=n_skipped,
    )


@dataclass(frozen=True)
class ExperimentSpec:
    corpus: Corpus
    model_name: str
    levels: tuple[SpecLevel, ...]
    plans: tuple[str, ...] = DEFAULT_PLANS
    ordering: ExampleOrdering = ExampleOrdering.CORPUS_ORDER
    seed: int = 0
    templates: PromptTemplates | None = None

    def run_specs(self) -> list[RunSpec]:
        specs = []
        for level in self.levels:
            for plan in self.plans:
                specs.append(
                    RunSpec(
                        corpus=self.corpus,
                        model_name=self.model_name,
                        level=level,
                        plan_label=plan,
                        ordering=self.ordering,
                        seed=self.seed,
                        templates=self.templates,
                    )
                )
        return specs

    def manifest_mapping(self) -> dict:
        return {
            "corpus_name": self.corpus.name,
            "corpus_version": self.corpus.version,
            "model_name": self.model_name,
            "levels": [l.value for l in self.levels],
            "plans": list(self.plans),
            "ordering": self.ordering.value,
            "seed": self.seed,
            "run_ids": [s.run_id for s in self.run_specs()],
        }


def run_experiment(
    spec: ExperimentSpec,
    out_dir: str | Path,
    gateway: ModelGateway | None = None,
    complete_fn: CompleteFn | None = None,
    concurrency: int = DEFAULT_CONCURRENCY,
    resume: bool = False,
) -> list[RunResult]:
    out = Path(out_dir)
    _write_atomic(out / "manifest", _dump_json(spec.manifest_mapping()))
    results = []
    for run_spec in spec.run_specs():
        results.append(
            run_suggestions(
                run_spec,
                out,
                gateway=gateway,
                complete_fn=complete_fn,
                concurrency=concurrency,
                resume=resume,
            )
        )
    return results


# --- reading runs back -------------------------------------------------------

def load_run_manifest(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "manifest"
    if not path.is_file():
        raise ManifestCorruptError(f"{path}: missing manifest")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestCorruptError(f"{path}: {exc}") from None
    if "run_id" not in doc:
        raise ManifestCorruptError(f"{path}: manifest has no run_id")
    return doc


def load_run_records(run_dir: str | Path) -> list[SuggestionRecord]:
    records_dir = Path(run_dir) / "records"
    records = []
    if records_dir.is_dir():
        for path in sorted(records_dir.iterdir()):
            if path.name.startswith("."):
                continue
            records.append(
                SuggestionRecord.from_mapping(
                    json.loads(path.read_text(encoding="utf-8"))
                )
            )
    return records


def list_run_dirs(out_dir: str | Path) -> list[Path]:
    runs_root = Path(out_dir) / "runs"
    if not runs_root.is_dir():
        return []
    return sorted(p for p in runs_root.iterdir() if (p / "manifest").is_file())


def iter_run_manifests(out_dir: str | Path) -> Iterable[dict]:
    for run_dir in list_run_dirs(out_dir):
        yield load_run_manifest(run_dir)
