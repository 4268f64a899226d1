"""Metrics over suggestion runs.

Accuracy and chance baselines are kept as exact rationals for as long as
possible; rounding happens only at display time, half-up, so reported
figures are reproducible to the digit. The chance baseline for a level is
one over the number of distinct labels the corpus admits at that level.

Also here: the category confusion matrix (with an extra "unparsed" column
for replies naming no category), cosine similarity for embedding
comparisons, and tallies of human appropriateness labels.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, localcontext
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .corpus import Corpus, CorpusStats, GestureCategory, compute_stats
from .errors import (
    DimensionMismatchError,
    EmptyRunError,
    MissingTargetError,
    ParseError,
    WrongLevelError,
    ZeroVectorError,
)
from .normalize import (
    MatchKind,
    NormalizerConfig,
    ParseOutcome,
    ScoringPolicy,
    default_config,
    parse_suggestion,
    predicted_category,
    score_suggestion,
)
from .prompts import SpecLevel

UNPARSED_LABEL = "unparsed"


def format_ratio(value: Fraction, places: int = 3) -> str:
    """Exact rational rendered as a decimal string, half-up."""
    with localcontext() as ctx:
        ctx.prec = 60
        dec = Decimal(value.numerator) / Decimal(value.denominator)
        return str(dec.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


def format_percent(value: Fraction, places: int = 1) -> str:
    with localcontext() as ctx:
        ctx.prec = 60
        dec = Decimal(value.numerator) * 100 / Decimal(value.denominator)
        quantized = dec.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)
        return f"{quantized}%"


def chance_baseline(level: SpecLevel, stats: CorpusStats) -> Fraction:
    """Probability of a uniform random guess over the corpus label set."""
    if level is SpecLevel.CATEGORY:
        n = stats.n_categories
    elif level is SpecLevel.PHYSICAL:
        n = stats.n_physical
    elif level is SpecLevel.SEMANTIC_GESTURE:
        n = stats.n_semantic_gestures
    else:
        n = stats.n_semantic_descriptors
    if n == 0:
        raise EmptyRunError(f"no labels at level {level.value}")
    return Fraction(1, n)


# --- cosine similarity ------------------------------------------------------

def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine of the angle between two vectors, with compensated summation."""
    if len(a) != len(b):
        raise DimensionMismatchError(f"vector lengths differ: {len(a)} vs {len(b)}")
    if not a:
        raise ZeroVectorError("cosine undefined for empty vectors")
    dot = math.fsum(x * y for x, y in zip(a, b))
    norm_a = math.sqrt(math.fsum(x * x for x in a))
    norm_b = math.sqrt(math.fsum(y * y for y in b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine undefined for zero vectors")
    return dot / (norm_a * norm_b)


# --- confusion matrix -------------------------------------------------------

@dataclass
class ConfusionMatrix:
    """Truth category rows against predicted columns plus "unparsed".

    Row order follows first appearance in the corpus, so matrices from the
    same corpus line up. Each row sums to the number of records whose truth
    is that category, whatever the predictions were.
    """

    row_labels: tuple[str, ...]
    counts: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for row in self.row_labels:
            self.counts.setdefault(
                row, {col: 0 for col in self.col_labels}
            )

    @property
    def col_labels(self) -> tuple[str, ...]:
        return self.row_labels + (UNPARSED_LABEL,)

    @classmethod
    def for_corpus(cls, corpus: Corpus) -> "ConfusionMatrix":
        return cls(row_labels=tuple(c.value for c in corpus.categories()))

    def add(self, truth: GestureCategory, predicted: GestureCategory | None) -> None:
        col = predicted.value if predicted is not None else UNPARSED_LABEL
        if truth.value not in self.counts:
            raise MissingTargetError(f"truth category {truth.value!r} not in matrix rows")
        self.counts[truth.value][col] += 1

    def merge(self, other: "ConfusionMatrix") -> None:
        if other.row_labels != self.row_labels:
            raise WrongLevelError("cannot merge matrices with different row labels")
        for row in self.row_labels:
            for col in self.col_labels:
                self.counts[row][col] += other.counts[row][col]

    def row_total(self, row: str) -> int:
        return sum(self.counts[row].values())

    def total(self) -> int:
        return sum(self.row_total(row) for row in self.row_labels)

    def to_rows(self) -> list[list[object]]:
        header: list[object] = ["truth", *self.col_labels]
        rows: list[list[object]] = [header]
        for row in self.row_labels:
            rows.append([row, *(self.counts[row][col] for col in self.col_labels)])
        return rows

    def to_mapping(self) -> dict:
        return {
            "rows": list(self.row_labels),
            "cols": list(self.col_labels),
            "counts": {row: dict(self.counts[row]) for row in self.row_labels},
        }


# --- appropriateness labels -------------------------------------------------

class AppropriatenessValue(Enum):
    SIMILAR = "similar"
    DIFFERENT_APPROPRIATE = "different-appropriate"
    DIFFERENT_INAPPROPRIATE = "different-inappropriate"
    NO_GESTURE = "no-gesture"

    @classmethod
    def parse(cls, raw: str) -> "AppropriatenessValue":
        try:
            return cls(raw.strip().lower())
        except ValueError:
            raise ParseError(f"unknown appropriateness value: {raw!r}") from None


@dataclass(frozen=True)
class AppropriatenessSummary:
    counts: dict[AppropriatenessValue, int]
    total: int

    def share(self, value: AppropriatenessValue) -> Fraction:
        if self.total == 0:
            raise EmptyRunError("no appropriateness labels to summarize")
        return Fraction(self.counts.get(value, 0), self.total)

    @property
    def appropriate_share(self) -> Fraction:
        """Suggestions judged usable: similar plus different-but-appropriate."""
        return self.share(AppropriatenessValue.SIMILAR) + self.share(
            AppropriatenessValue.DIFFERENT_APPROPRIATE
        )

    def to_mapping(self) -> dict:
        return {
            "total": self.total,
            "counts": {v.value: self.counts.get(v, 0) for v in AppropriatenessValue},
            "percent": {
                v.value: format_percent(self.share(v)) for v in AppropriatenessValue
            },
            "appropriate_percent": format_percent(self.appropriate_share),
        }


def summarize_appropriateness(
    values: Iterable[AppropriatenessValue],
) -> AppropriatenessSummary:
    counts: dict[AppropriatenessValue, int] = {}
    total = 0
    for value in values:
        counts[value] = counts.get(value, 0) + 1
        total += 1
    if total == 0:
        raise EmptyRunError("no appropriateness labels to summarize")
    return AppropriatenessSummary(counts=counts, total=total)


# --- run evaluation ----------------------------------------------------------

class SuggestionLike(Protocol):
    """The slice of a run record that evaluation needs."""

    target_id: str
    output_text: str | None
    refusal: bool
    failed: bool


@dataclass(frozen=True)
class RunEvaluation:
    level: SpecLevel
    policy: ScoringPolicy
    n_records: int
    n_scored: int
    n_hits: int
    n_refusals: int
    n_failed: int
    n_unparsed: int
    accuracy: Fraction
    chance: Fraction
    match_kind_counts: dict[MatchKind, int]
    confusion: ConfusionMatrix | None

    @property
    def lift(self) -> Fraction:
        return self.accuracy / self.chance

    def to_mapping(self) -> dict:
        doc = {
            "level": self.level.value,
            "policy": self.policy.value,
            "n_records": self.n_records,
            "n_scored": self.n_scored,
            "n_hits": self.n_hits,
            "n_refusals": self.n_refusals,
            "n_failed": self.n_failed,
            "n_unparsed": self.n_unparsed,
            "accuracy": {
                "fraction": f"{self.accuracy.numerator}/{self.accuracy.denominator}",
                "value": format_ratio(self.accuracy),
            },
            "chance": {
                "fraction": f"{self.chance.numerator}/{self.chance.denominator}",
                "value": format_ratio(self.chance),
            },
            "lift": format_ratio(self.lift, places=2),
            "match_kinds": {k.value: v for k, v in self.match_kind_counts.items()},
        }
        if self.confusion is not None:
            doc["confusion"] = self.confusion.to_mapping()
        return doc


def evaluate_run(
    records: Sequence[SuggestionLike],
    corpus: Corpus,
    level: SpecLevel,
    policy: ScoringPolicy = ScoringPolicy.FIRST_ONLY,
    config: NormalizerConfig | None = None,
) -> RunEvaluation:
    """Score one run's records against the corpus at a specification level.

    Failed records (transport errors during a live run) are excluded from
    the denominator; refusals and unparsed replies count as misses. The
    confusion matrix is only built where replies carry a category, which
    rules out the semantic-only level.
    """
    if not records:
        raise EmptyRunError("run has no records")
    config = config or default_config()
    stats = compute_stats(corpus)
    confusion = (
        ConfusionMatrix.for_corpus(corpus)
        if level in (SpecLevel.CATEGORY, SpecLevel.PHYSICAL)
        else None
    )
    match_kind_counts: dict[MatchKind, int] = {k: 0 for k in MatchKind}
    n_scored = n_hits = n_refusals = n_failed = n_unparsed = 0
    for record in records:
        truth = corpus.get(record.target_id)
        if truth is None:
            raise MissingTargetError(
                f"record target {record.target_id!r} not in corpus {corpus.name!r}"
            )
        if record.failed:
            n_failed += 1
            continue
        n_scored += 1
        if record.refusal or record.output_text is None:
            outcome = ParseOutcome(raw=record.output_text or "", candidates=(), refusal=True)
        else:
            outcome = parse_suggestion(record.output_text, config)
        if outcome.refusal:
            n_refusals += 1
        result = score_suggestion(outcome, truth, level, policy, config)
        match_kind_counts[result.kind] += 1
        if result.matched:
            n_hits += 1
        if result.kind is MatchKind.UNPARSED:
            n_unparsed += 1
        if confusion is not None:
            confusion.add(truth.category, predicted_category(outcome))
    if n_scored == 0:
        raise EmptyRunError("run has no scorable records")
    return RunEvaluation(
        level=level,
        policy=policy,
        n_records=len(records),
        n_scored=n_scored,
        n_hits=n_hits,
        n_refusals=n_refusals,
        n_failed=n_failed,
        n_unparsed=n_unparsed,
        accuracy=Fraction(n_hits, n_scored),
        chance=chance_baseline(level, stats),
        match_kind_counts=match_kind_counts,
        confusion=confusion,
    )


# --- embedding similarity report ---------------------------------------------

@dataclass(frozen=True)
class SimilarityEntry:
    target_id: str
    similarity: float


@dataclass(frozen=True)
class SimilarityReport:
    entries: tuple[SimilarityEntry, ...]
    gaps: tuple[str, ...]

    @property
    def mean(self) -> float:
        if not self.entries:
            raise EmptyRunError("no similarity pairs to average")
        return math.fsum(e.similarity for e in self.entries) / len(self.entries)

    def to_mapping(self) -> dict:
        return {
            "mean": self.mean if self.entries else None,
            "pairs": [
                {"target_id": e.target_id, "similarity": e.similarity}
                for e in self.entries
            ],
            "gaps": list(self.gaps),
        }


def similarity_report(
    records: Sequence[SuggestionLike],
    corpus: Corpus,
    level: SpecLevel,
    embed_fn,
) -> SimilarityReport:
    """Cosine similarity between each reply and its truth label.

    ``embed_fn`` maps text to a float vector. Records that failed, refused,
    or embed to a zero vector are listed as gaps rather than dropped
    silently.
    """
    from .prompts import render_label

    entries: list[SimilarityEntry] = []
    gaps: list[str] = []
    for record in records:
        if record.failed or record.refusal or not record.output_text:
            gaps.append(record.target_id)
            continue
        truth = corpus.get(record.target_id)
        if truth is None:
            raise MissingTargetError(f"record target {record.target_id!r} not in corpus")
        try:
            sim = cosine_similarity(
                embed_fn(record.output_text), embed_fn(render_label(truth, level))
            )
        except ZeroVectorError:
            gaps.append(record.target_id)
            continue
        entries.append(SimilarityEntry(target_id=record.target_id, similarity=sim))
    return SimilarityReport(entries=tuple(entries), gaps=tuple(gaps))


# --- report files -------------------------------------------------------------

def write_report(
    out_dir: str | Path,
    evaluations: Sequence[RunEvaluation],
    appropriateness: AppropriatenessSummary | None = None,
    similarity: SimilarityReport | None = None,
) -> Path:
    """Write report.json plus CSV side files; returns the JSON path.

    CSVs: accuracy.csv (one row per evaluation), match_kinds.csv,
    confusion.csv (category-level evaluations merged), and
    appropriateness.csv when labels exist.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc: dict = {"evaluations": [e.to_mapping() for e in evaluations]}

    merged: ConfusionMatrix | None = None
    for ev in evaluations:
        if ev.confusion is None:
            continue
        if merged is None:
            merged = ConfusionMatrix(row_labels=ev.confusion.row_labels)
        merged.merge(ev.confusion)
    if merged is not None:
        doc["confusion"] = merged.to_mapping()
    if appropriateness is not None:
        doc["appropriateness"] = appropriateness.to_mapping()
    if similarity is not None:
        doc["similarity"] = similarity.to_mapping()

    report_path = out / "report.json"
    report_path.write_text(
        json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    with (out / "accuracy.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["level", "policy", "n_scored", "n_hits", "accuracy", "chance", "lift"]
        )
        for ev in evaluations:
            writer.writerow(
                [
                    ev.level.value,
                    ev.policy.value,
                    ev.n_scored,
                    ev.n_hits,
                    format_ratio(ev.accuracy),
                    format_ratio(ev.chance),
                    format_ratio(ev.lift, places=2),
                ]
            )

    with (out / "match_kinds.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "policy", *(k.value for k in MatchKind)])
        for ev in evaluations:
            writer.writerow(
                [
                    ev.level.value,
                    ev.policy.value,
                    *(ev.match_kind_counts.get(k, 0) for k in MatchKind),
                ]
            )

    if merged is not None:
        with (out / "confusion.csv").open("w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(merged.to_rows())

    if appropriateness is not None:
        with (out / "appropriateness.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["value", "count", "percent"])
            for value in AppropriatenessValue:
                writer.writerow(
                    [
                        value.value,
                        appropriateness.counts.get(value, 0),
                        format_percent(appropriateness.share(value)),
                    ]
                )

    return report_path
