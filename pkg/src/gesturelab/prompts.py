"""Deterministic prompt rendering for gesture suggestion queries.

Few-shot prompts have three parts: a one-line scene statement, a block of
example sentences each ending in a quoted gesture label, and a target
sentence cut off right at the gesture slot. Zero-shot prompts drop the
examples and ask directly. Probe prompts cover the qualitative checks
(explanations, next-gesture prediction, visualization, and opaque-label
completion).

All builders are pure functions of their inputs; identical inputs yield
byte-identical prompts.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .corpus import Corpus, GestureAnnotation, GestureCategory
from .errors import (
    InsufficientExamplesError,
    MissingGestureLabelError,
    ParseError,
    UnknownTargetError,
)


class SpecLevel(Enum):
    """Granularity at which the model is asked to name the gesture."""

    CATEGORY = "category"
    PHYSICAL = "physical"
    SEMANTIC_GESTURE = "semantic-gesture"
    SEMANTIC_ONLY = "semantic-only"

    @classmethod
    def parse(cls, raw: str) -> "SpecLevel":
        try:
            return cls(raw.strip().lower())
        except ValueError:
            raise ParseError(f"unknown specification level: {raw!r}") from None


class PlanMode(Enum):
    PER_CATEGORY_K = "per-category-k"
    LEAVE_ONE_OUT = "leave-one-out"


class ExampleOrdering(Enum):
    CORPUS_ORDER = "corpus-order"
    SEEDED_SHUFFLE = "seeded-shuffle"


@dataclass(frozen=True)
class ExamplePlan:
    """How examples are chosen: k per category, or everything but the target."""

    mode: PlanMode
    k: int | None = None
    seed: int = 0
    ordering: ExampleOrdering = ExampleOrdering.CORPUS_ORDER

    def __post_init__(self) -> None:
        if self.mode is PlanMode.PER_CATEGORY_K:
            if self.k is None or self.k < 1:
                raise ValueError("per-category plans need k >= 1")
        elif self.k is not None:
            raise ValueError("leave-one-out plans do not take k")

    @classmethod
    def per_category(
        cls,
        k: int,
        seed: int = 0,
        ordering: ExampleOrdering = ExampleOrdering.CORPUS_ORDER,
    ) -> "ExamplePlan":
        return cls(mode=PlanMode.PER_CATEGORY_K, k=k, seed=seed, ordering=ordering)

    @classmethod
    def leave_one_out(
        cls,
        seed: int = 0,
        ordering: ExampleOrdering = ExampleOrdering.CORPUS_ORDER,
    ) -> "ExamplePlan":
        return cls(mode=PlanMode.LEAVE_ONE_OUT, seed=seed, ordering=ordering)


class ProbeKind(Enum):
    EXPLAIN_GESTURE = "explain-gesture"
    NEXT_GESTURE = "next-gesture"
    VISUALIZE = "visualize"
    OPAQUE_LABEL_COMPLETION = "opaque-label-completion"


@dataclass(frozen=True)
class PromptBundle:
    """A fully rendered prompt plus the provenance of how it was built."""

    context_part: str
    example_parts: tuple[str, ...]
    target_part: str
    target_id: str
    spec_level: SpecLevel | None
    plan: ExamplePlan | None
    example_ids: tuple[str, ...]

    @property
    def rendered(self) -> str:
        """All non-empty parts joined by single blank lines."""
        parts = [self.context_part, *self.example_parts, self.target_part]
        return "\n\n".join(p for p in parts if p)


@dataclass(frozen=True)
class PromptTemplates:
    """Prompt wording. Override via a JSON file to experiment with phrasing."""

    example: str = (
        'He said "{segment}" When he said "{trigger}", '
        'he used the following gesture: "{label}".'
    )
    target: str = (
        'He said "{segment}" When he said "{trigger}", '
        "he used the following gesture: "
    )
    zeroshot: str = 'He said "{segment}" When he said "{trigger}", what gesture did he use?'
    explain_probe: str = "{context} She used a {label} gesture when she said {utterance}."
    next_probe: str = (
        '{context} To illustrate "{utterance}", '
        "what gesture might she use after the {label} gesture."
    )
    visualize_probe: str = "Can you visualize it in some way?"
    opaque_example: str = "{utterance} {label}"

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptTemplates":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: not valid JSON: {exc}") from None
        unknown = set(doc) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise ParseError(f"{path}: unknown template names: {sorted(unknown)}")
        return cls(**doc)


DEFAULT_TEMPLATES = PromptTemplates()


def render_label(annotation: GestureAnnotation, level: SpecLevel) -> str:
    """The gesture label at the requested specification level."""
    if level is SpecLevel.CATEGORY:
        return annotation.category.value
    if level is SpecLevel.PHYSICAL:
        return annotation.physical.label
    if level is SpecLevel.SEMANTIC_GESTURE:
        return annotation.semantic_gesture
    return annotation.semantic_descriptor


def _example_pool(
    corpus: Corpus, target_id: str, plan: ExamplePlan
) -> list[GestureAnnotation]:
    pool = [a for a in corpus.annotations if a.id != target_id]
    if plan.ordering is ExampleOrdering.SEEDED_SHUFFLE:
        rng = random.Random(plan.seed)
        rng.shuffle(pool)
    return pool


def _select_examples(
    corpus: Corpus, target_id: str, plan: ExamplePlan
) -> list[GestureAnnotation]:
    pool = _example_pool(corpus, target_id, plan)
    if plan.mode is PlanMode.LEAVE_ONE_OUT:
        return pool
    wanted: dict[GestureCategory, int] = {}
    for ann in pool:
        wanted.setdefault(ann.category, 0)
    chosen: list[GestureAnnotation] = []
    for ann in pool:
        if wanted[ann.category] < plan.k:
            chosen.append(ann)
            wanted[ann.category] += 1
    short = [c for c, n in wanted.items() if n < plan.k]
    if short:
        names = ", ".join(sorted(c.value for c in short))
        raise InsufficientExamplesError(
            f"not enough non-target examples for k={plan.k}: {names}"
        )
    return chosen


def build_fewshot(
    corpus: Corpus,
    target_id: str,
    level: SpecLevel,
    plan: ExamplePlan,
    templates: PromptTemplates = DEFAULT_TEMPLATES,
) -> PromptBundle:
    """Three-part prompt: scene line, labeled examples, unlabeled target."""
    target = corpus.get(target_id)
    if target is None:
        raise UnknownTargetError(f"no annotation with id {target_id!r}")
    examples = _select_examples(corpus, target_id, plan)
    example_parts = tuple(
        templates.example.format(
            segment=a.segment_text,
            trigger=a.trigger_phrase,
            label=render_label(a, level),
        )
        for a in examples
    )
    target_part = templates.target.format(
        segment=target.segment_text, trigger=target.trigger_phrase
    )
    return PromptBundle(
        context_part=corpus.context_statement,
        example_parts=example_parts,
        target_part=target_part,
        target_id=target_id,
        spec_level=level,
        plan=plan,
        example_ids=tuple(a.id for a in examples),
    )


def build_zeroshot(
    corpus: Corpus,
    target_id: str,
    templates: PromptTemplates = DEFAULT_TEMPLATES,
) -> PromptBundle:
    """Scene line plus a bare question about the target utterance."""
    target = corpus.get(target_id)
    if target is None:
        raise UnknownTargetError(f"no annotation with id {target_id!r}")
    target_part = templates.zeroshot.format(
        segment=target.segment_text, trigger=target.trigger_phrase
    )
    return PromptBundle(
        context_part=corpus.context_statement,
        example_parts=(),
        target_part=target_part,
        target_id=target_id,
        spec_level=None,
        plan=None,
        example_ids=(),
    )


def build_probe(
    kind: ProbeKind,
    context: str = "",
    utterance: str = "",
    gesture_label: str | None = None,
    examples: tuple[tuple[str, str], ...] = (),
    templates: PromptTemplates = DEFAULT_TEMPLATES,
) -> PromptBundle:
    """Qualitative probe prompts.

    ``examples`` only applies to opaque-label completion, where each
    (utterance, label) pair becomes one example line and ``utterance`` is the
    bare completion target.
    """
    if kind in (ProbeKind.EXPLAIN_GESTURE, ProbeKind.NEXT_GESTURE) and not gesture_label:
        raise MissingGestureLabelError(f"{kind.value} probes need a gesture label")
    example_parts: tuple[str, ...] = ()
    if kind is ProbeKind.EXPLAIN_GESTURE:
        context_part = ""
        target_part = templates.explain_probe.format(
            context=context, label=gesture_label, utterance=utterance
        )
    elif kind is ProbeKind.NEXT_GESTURE:
        context_part = ""
        target_part = templates.next_probe.format(
            context=context, label=gesture_label, utterance=utterance
        )
    elif kind is ProbeKind.VISUALIZE:
        context_part = context
        target_part = templates.visualize_probe
    else:
        context_part = context
        example_parts = tuple(
            templates.opaque_example.format(utterance=u, label=l) for u, l in examples
        )
        target_part = utterance
    return PromptBundle(
        context_part=context_part,
        example_parts=example_parts,
        target_part=target_part,
        target_id=f"probe-{kind.value}",
        spec_level=None,
        plan=None,
        example_ids=(),
    )
