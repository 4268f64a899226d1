"""Command line entry points.

Subcommands cover the pipeline end to end: corpus validation and stats,
CSV conversion, experiment runs, evaluation and reporting, dictionary
matching, and the review service. Failures print one line to stderr as
"ErrorClass: message" and exit with the error's stable exit code.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .corpus import (
    Corpus,
    compute_stats,
    corpus_from_csv,
    load_corpus,
    load_reference_corpus,
    mini_corpus_path,
    save_corpus,
)
from .dictionary import DEFAULT_THRESHOLD, GestureDictionary, default_dictionary, match_description
from .errors import ConfigError, GestureLabError
from .evaluate import (
    chance_baseline,
    evaluate_run,
    format_ratio,
    write_report,
)
from .gateway import ModelConfig, ProviderKind, make_gateway
from .normalize import ScoringPolicy
from .prompts import ExampleOrdering, PromptTemplates, SpecLevel
from .runner import (
    DEFAULT_CONCURRENCY,
    DEFAULT_PLANS,
    ExperimentSpec,
    list_run_dirs,
    load_run_manifest,
    load_run_records,
    run_experiment,
)


def _load_corpus_arg(value: str) -> Corpus:
    if value == "reference":
        return load_reference_corpus()
    if value == "mini":
        return load_corpus(mini_corpus_path())
    return load_corpus(value)


def _add_corpus_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--corpus",
        default="reference",
        help="corpus JSON path, or 'reference' / 'mini' for the bundled sets",
    )


def _cmd_validate(args: argparse.Namespace) -> int:
    corpus = _load_corpus_arg(args.corpus)
    for annotation in corpus.annotations:
        annotation.validate()
    stats = compute_stats(corpus)
    print(
        f"OK: {corpus.name} v{corpus.version}: {stats.n_annotations} annotations, "
        f"{stats.n_categories} categories, {stats.n_physical} physical forms, "
        f"{stats.n_semantic_gestures} semantic gestures, "
        f"{stats.n_semantic_descriptors} descriptors"
    )
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    corpus = _load_corpus_arg(args.corpus)
    stats = compute_stats(corpus)
    doc = {
        "name": corpus.name,
        "version": corpus.version,
        "n_annotations": stats.n_annotations,
        "n_categories": stats.n_categories,
        "n_physical": stats.n_physical,
        "n_semantic_gestures": stats.n_semantic_gestures,
        "n_semantic_descriptors": stats.n_semantic_descriptors,
        "per_category": dict(stats.per_category_counts),
        "chance": {
            level.value: format_ratio(chance_baseline(level, stats))
            for level in SpecLevel
        },
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_convert(args: argparse.Namespace) -> int:
    corpus = corpus_from_csv(
        args.input,
        name=args.name,
        version=args.version,
        context_statement=args.context,
    )
    for annotation in corpus.annotations:
        annotation.validate()
    save_corpus(corpus, args.output)
    print(f"wrote {len(corpus.annotations)} annotations to {args.output}")
    return 0


def _parse_levels(raw: list[str]) -> tuple[SpecLevel, ...]:
    return tuple(SpecLevel.parse(item) for item in raw)


def _make_gateway_from_args(args: argparse.Namespace):
    config = ModelConfig(
        model_name=args.model,
        base_url=args.base_url,
        embedding_model=getattr(args, "embedding_model", None),
        timeout=args.timeout,
        max_retries=args.max_retries,
    )
    return make_gateway(ProviderKind(args.provider), config, args.cache)


def _cmd_run(args: argparse.Namespace) -> int:
    corpus = _load_corpus_arg(args.corpus)
    templates = PromptTemplates.from_file(args.templates) if args.templates else None
    spec = ExperimentSpec(
        corpus=corpus,
        model_name=args.model,
        levels=_parse_levels(args.levels),
        plans=tuple(args.plans),
        ordering=ExampleOrdering(args.ordering),
        seed=args.seed,
        templates=templates,
    )
    gateway = _make_gateway_from_args(args)
    results = run_experiment(
        spec,
        args.out,
        gateway=gateway,
        concurrency=args.concurrency,
        resume=args.resume,
    )
    for result in results:
        print(
            f"{result.run_id}: ok={result.n_ok} refusals={result.n_refusals} "
            f"failed={result.n_failed} skipped={result.n_skipped}"
        )
    return 0


def _policies(raw: str) -> list[ScoringPolicy]:
    if raw == "both":
        return list(ScoringPolicy)
    return [ScoringPolicy(raw)]


def _cmd_eval(args: argparse.Namespace) -> int:
    corpus = _load_corpus_arg(args.corpus)
    run_dirs = list_run_dirs(args.out)
    if args.run:
        run_dirs = [d for d in run_dirs if d.name == args.run]
        if not run_dirs:
            raise ConfigError(f"no run named {args.run!r} under {args.out}")
    for run_dir in run_dirs:
        manifest = load_run_manifest(run_dir)
        level = SpecLevel.parse(manifest["level"])
        records = load_run_records(run_dir)
        evaluations = [
            evaluate_run(records, corpus, level, policy)
            for policy in _policies(args.policy)
        ]
        report_path = write_report(run_dir / "report", evaluations)
        for ev in evaluations:
            print(
                f"{manifest['run_id']} [{ev.policy.value}]: "
                f"accuracy {ev.n_hits}/{ev.n_scored} = {format_ratio(ev.accuracy)} "
                f"(chance {format_ratio(ev.chance)})"
            )
        print(f"  report: {report_path}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    corpus = _load_corpus_arg(args.corpus)
    policy = ScoringPolicy(args.policy)
    rows = []
    for run_dir in list_run_dirs(args.out):
        manifest = load_run_manifest(run_dir)
        level = SpecLevel.parse(manifest["level"])
        records = load_run_records(run_dir)
        ev = evaluate_run(records, corpus, level, policy)
        rows.append(
            (
                manifest["run_id"],
                manifest["level"],
                manifest["plan"],
                f"{ev.n_hits}/{ev.n_scored}",
                format_ratio(ev.accuracy),
                format_ratio(ev.chance),
            )
        )
    if not rows:
        print(f"no runs under {args.out}")
        return 0
    header = ("run", "level", "plan", "hits", "accuracy", "chance")
    widths = [
        max(len(str(row[i])) for row in [header, *rows]) for i in range(len(header))
    ]
    for row in [header, *rows]:
        print("  ".join(str(cell).ljust(widths[i]) for i, cell in enumerate(row)))
    return 0


def _cmd_match(args: argparse.Namespace) -> int:
    dictionary = (
        GestureDictionary.from_file(args.dictionary)
        if args.dictionary
        else default_dictionary()
    )
    gateway = _make_gateway_from_args(args)
    embed_fn = lambda text: gateway.embed(text).vector
    result = match_description(args.text, dictionary, embed_fn, threshold=args.threshold)
    doc = {
        "matched": not result.novel,
        "entry_id": result.entry_id,
        "nearest_id": result.nearest_id,
        "similarity": round(result.similarity, 6),
        "threshold": result.threshold,
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app, mount_static

    corpus = _load_corpus_arg(args.corpus)
    app = create_app(args.out, corpus)
    if args.static:
        mount_static(app, args.static)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gesturelab",
        description="gesture suggestion experiments over annotated speech corpora",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a corpus file against all invariants")
    _add_corpus_arg(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("stats", help="print corpus cardinalities and chance baselines")
    _add_corpus_arg(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("convert", help="convert an annotation CSV to corpus JSON")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--name", required=True)
    p.add_argument("--version", default="1.0.0")
    p.add_argument("--context", required=True, help="scene statement for prompts")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("run", help="run a suggestion experiment")
    _add_corpus_arg(p)
    p.add_argument("--model", required=True)
    p.add_argument("--provider", choices=[k.value for k in ProviderKind], default="mock")
    p.add_argument("--cache", required=True, help="response cache directory")
    p.add_argument("--out", required=True, help="experiment output directory")
    p.add_argument(
        "--levels",
        nargs="+",
        default=[level.value for level in SpecLevel],
        help="specification levels to run",
    )
    p.add_argument("--plans", nargs="+", default=list(DEFAULT_PLANS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--ordering",
        choices=[o.value for o in ExampleOrdering],
        default=ExampleOrdering.CORPUS_ORDER.value,
    )
    p.add_argument("--concurrency", type=int, default=DEFAULT_CONCURRENCY)
    p.add_argument("--base-url", default="https://api.openai.com/v1")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--templates", help="JSON file overriding prompt templates")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="score runs and write report files")
    _add_corpus_arg(p)
    p.add_argument("--out", required=True)
    p.add_argument("--run", help="only this run id")
    p.add_argument(
        "--policy",
        choices=["both", *(policy.value for policy in ScoringPolicy)],
        default="both",
    )
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="print a summary table across runs")
    _add_corpus_arg(p)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--policy",
        choices=[policy.value for policy in ScoringPolicy],
        default=ScoringPolicy.FIRST_ONLY.value,
    )
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("match", help="match a description against the gesture dictionary")
    p.add_argument("--text", required=True)
    p.add_argument("--dictionary", help="dictionary JSON (default: bundled)")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--model", required=True)
    p.add_argument("--embedding-model")
    p.add_argument("--provider", choices=[k.value for k in ProviderKind], default="mock")
    p.add_argument("--cache", required=True)
    p.add_argument("--base-url", default="https://api.openai.com/v1")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("serve", help="serve the review API")
    _add_corpus_arg(p)
    p.add_argument("--out", required=True, help="experiment output directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", help="directory of built frontend files to serve")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GestureLabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
