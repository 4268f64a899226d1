"""Annotated gesture corpus: types, loading, validation, and summary stats.

A corpus is an ordered list of gesture annotations over a single speech,
stored as one UTF-8 JSON document (see ``docs/corpus-format`` section of the
README). Annotations record the spoken segment, the trigger phrase gestured
over, the gesture category, its physical form, and a semantic descriptor.

Corpus values are immutable after load; mutation means building a new one.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import EmptyCorpusError, ParseError, ValidationError

_WS = re.compile(r"\s+")


def normalize_label(text: str) -> str:
    """Canonical label form: lowercase, trimmed, internal whitespace collapsed."""
    return _WS.sub(" ", text.strip().lower())


class GestureCategory(Enum):
    SPAN = "span"
    CONTAINER = "container"
    SWEEP = "sweep"

    @classmethod
    def parse(cls, raw: str) -> "GestureCategory":
        try:
            return cls(normalize_label(raw))
        except ValueError:
            raise ParseError(f"unknown gesture category: {raw!r}") from None


class PalmOrientation(Enum):
    UP = "up"
    DOWN = "down"
    IN = "in"
    FORWARD = "forward"

    @classmethod
    def parse(cls, raw: str) -> "PalmOrientation":
        try:
            return cls(normalize_label(raw))
        except ValueError:
            raise ParseError(f"unknown palm orientation: {raw!r}") from None


@dataclass(frozen=True)
class PhysicalGesture:
    """Physical form of a gesture: the category plus, for sweeps, the palm.

    Only six distinct values are constructible: span, container, and the
    four palm orientations of a sweep.
    """

    category: GestureCategory
    palm_orientation: PalmOrientation | None = None

    def __post_init__(self) -> None:
        if self.category is GestureCategory.SWEEP:
            if self.palm_orientation is None:
                raise ValidationError("sweep gestures require a palm orientation")
        elif self.palm_orientation is not None:
            raise ValidationError(
                f"{self.category.value} gestures do not take a palm orientation"
            )

    @property
    def label(self) -> str:
        if self.category is GestureCategory.SWEEP:
            return f"sweep with palm facing {self.palm_orientation.value}"
        return self.category.value


@dataclass(frozen=True)
class GestureAnnotation:
    """One annotated gesture: where it happened in the speech and what it was."""

    id: str
    segment_text: str
    trigger_phrase: str
    category: GestureCategory
    physical: PhysicalGesture
    semantic_descriptor: str
    speaker: str
    context: str

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("annotation has an empty id")
        if self.trigger_phrase not in self.segment_text:
            raise ValidationError(
                f"annotation {self.id}: trigger_phrase is not a substring of segment_text"
            )
        if not self.semantic_descriptor:
            raise ValidationError(f"annotation {self.id}: semantic_descriptor is empty")
        if self.semantic_descriptor != normalize_label(self.semantic_descriptor):
            raise ValidationError(
                f"annotation {self.id}: semantic_descriptor is not in canonical form"
            )
        if self.physical.category is not self.category:
            raise ValidationError(
                f"annotation {self.id}: physical gesture category disagrees with category"
            )

    @property
    def semantic_gesture(self) -> str:
        """Descriptor plus category, e.g. ``negative sweep``."""
        return f"{self.semantic_descriptor} {self.category.value}"


@dataclass(frozen=True)
class Corpus:
    """Ordered, validated collection of gesture annotations for one speech."""

    annotations: tuple[GestureAnnotation, ...]
    context_statement: str
    name: str
    version: str
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        index: dict[str, GestureAnnotation] = {}
        for ann in self.annotations:
            ann.validate()
            if ann.id in index:
                raise ValidationError(f"duplicate annotation id: {ann.id}")
            index[ann.id] = ann
        object.__setattr__(self, "_by_id", index)

    def __len__(self) -> int:
        return len(self.annotations)

    def __contains__(self, annotation_id: str) -> bool:
        return annotation_id in self._by_id

    def get(self, annotation_id: str) -> GestureAnnotation | None:
        return self._by_id.get(annotation_id)

    def categories(self) -> tuple[GestureCategory, ...]:
        """Categories present, in order of first appearance."""
        seen: list[GestureCategory] = []
        for ann in self.annotations:
            if ann.category not in seen:
                seen.append(ann.category)
        return tuple(seen)


@dataclass(frozen=True)
class CorpusStats:
    n_annotations: int
    n_categories: int
    n_physical: int
    n_semantic_gestures: int
    n_semantic_descriptors: int
    per_category_counts: Mapping[str, int]


def compute_stats(corpus: Corpus) -> CorpusStats:
    """Exact set cardinalities over the corpus labels.

    Semantic gestures are unique (descriptor, category) pairs; semantic
    descriptors are unique descriptor values. Labels are already canonical
    after load, so plain set arithmetic suffices.
    """
    if not corpus.annotations:
        raise EmptyCorpusError("cannot compute stats for an empty corpus")
    categories = {a.category for a in corpus.annotations}
    physical = {a.physical for a in corpus.annotations}
    pairs = {(a.semantic_descriptor, a.category) for a in corpus.annotations}
    descriptors = {a.semantic_descriptor for a in corpus.annotations}
    per_category = {
        cat.value: sum(1 for a in corpus.annotations if a.category is cat)
        for cat in corpus.categories()
    }
    return CorpusStats(
        n_annotations=len(corpus.annotations),
        n_categories=len(categories),
        n_physical=len(physical),
        n_semantic_gestures=len(pairs),
        n_semantic_descriptors=len(descriptors),
        per_category_counts=per_category,
    )


# --- serialization ----------------------------------------------------------

_REQUIRED_ANNOTATION_FIELDS = (
    "id",
    "segment_text",
    "trigger_phrase",
    "category",
    "semantic_descriptor",
    "speaker",
    "context",
)


def annotation_from_mapping(raw: Mapping, *, where: str) -> GestureAnnotation:
    for key in _REQUIRED_ANNOTATION_FIELDS:
        if key not in raw:
            raise ParseError(f"{where}: missing field {key!r}")
        if not isinstance(raw[key], str):
            raise ParseError(f"{where}: field {key!r} must be a string")
    category = GestureCategory.parse(raw["category"])
    palm_raw = raw.get("palm_orientation")
    palm = None
    if palm_raw not in (None, ""):
        if not isinstance(palm_raw, str):
            raise ParseError(f"{where}: palm_orientation must be a string or null")
        palm = PalmOrientation.parse(palm_raw)
    try:
        physical = PhysicalGesture(category=category, palm_orientation=palm)
    except ValidationError as exc:
        raise ValidationError(f"annotation {raw['id']}: {exc}") from None
    return GestureAnnotation(
        id=raw["id"].strip(),
        segment_text=raw["segment_text"],
        trigger_phrase=raw["trigger_phrase"],
        category=category,
        physical=physical,
        semantic_descriptor=normalize_label(raw["semantic_descriptor"]),
        speaker=raw["speaker"].strip(),
        context=raw["context"].strip(),
    )


def annotation_to_mapping(ann: GestureAnnotation) -> dict:
    return {
        "id": ann.id,
        "segment_text": ann.segment_text,
        "trigger_phrase": ann.trigger_phrase,
        "category": ann.category.value,
        "palm_orientation": (
            ann.physical.palm_orientation.value if ann.physical.palm_orientation else None
        ),
        "semantic_descriptor": ann.semantic_descriptor,
        "speaker": ann.speaker,
        "context": ann.context,
    }


def corpus_from_mapping(doc: Mapping, *, where: str = "corpus") -> Corpus:
    for key in ("name", "version", "context_statement", "annotations"):
        if key not in doc:
            raise ParseError(f"{where}: missing top-level field {key!r}")
    if not isinstance(doc["annotations"], list):
        raise ParseError(f"{where}: annotations must be a list")
    annotations = tuple(
        annotation_from_mapping(raw, where=f"{where}: annotation #{i}")
        for i, raw in enumerate(doc["annotations"], start=1)
    )
    return Corpus(
        annotations=annotations,
        context_statement=doc["context_statement"],
        name=doc["name"],
        version=doc["version"],
    )


def corpus_to_mapping(corpus: Corpus) -> dict:
    return {
        "name": corpus.name,
        "version": corpus.version,
        "context_statement": corpus.context_statement,
        "annotations": [annotation_to_mapping(a) for a in corpus.annotations],
    }


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a corpus document, preserving annotation order."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    return corpus_from_mapping(doc, where=str(path))


def dumps_corpus(corpus: Corpus) -> str:
    """Deterministic serialization: same corpus, same bytes."""
    return json.dumps(corpus_to_mapping(corpus), ensure_ascii=False, indent=2) + "\n"


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(dumps_corpus(corpus), encoding="utf-8")


def corpus_from_csv(
    path: str | Path,
    *,
    name: str,
    version: str,
    context_statement: str,
) -> Corpus:
    """Convert a flat comma-separated table with the annotation columns.

    Expected header: id, segment_text, trigger_phrase, category,
    palm_orientation, semantic_descriptor, speaker, context. An empty
    palm_orientation cell means none.
    """
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty CSV file")
        missing = [c for c in _REQUIRED_ANNOTATION_FIELDS if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"{path}: missing columns: {', '.join(missing)}")
        rows = [
            annotation_from_mapping(
                {k: (v if v != "" else None) if k == "palm_orientation" else (v or "")
                 for k, v in row.items()},
                where=f"{path}: row {i}",
            )
            for i, row in enumerate(reader, start=2)
        ]
    return Corpus(
        annotations=tuple(rows),
        context_statement=context_statement,
        name=name,
        version=version,
    )


def reference_corpus_path() -> Path:
    """Path of the bundled transcription of the annotated convention speech."""
    return Path(resources.files("gesturelab.data") / "obama_dnc_2020.json")


def mini_corpus_path() -> Path:
    """Path of the bundled six-record synthetic corpus used by the tests."""
    return Path(resources.files("gesturelab.data") / "mini_tour.json")


def load_reference_corpus() -> Corpus:
    return load_corpus(reference_corpus_path())


def iter_annotations_by_category(
    corpus: Corpus, category: GestureCategory
) -> Iterable[GestureAnnotation]:
    return (a for a in corpus.annotations if a.category is category)
