"""Parsing and scoring of raw model output.

Model replies range from a bare label ("span") to hedged compounds
("negative/negation span/sweep") to refusals ("he did not use a gesture").
``parse_suggestion`` turns a reply into zero or more candidate gestures;
``score_suggestion`` compares candidates against an annotation at a given
specification level.

Keyword tables and thresholds live in a JSON config so they can be tuned
without code changes; the bundled defaults cover the reference corpus.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .corpus import GestureAnnotation, GestureCategory, PalmOrientation, normalize_label
from .errors import EmptyDescriptorError, ParseError
from .prompts import SpecLevel

# Characters flattened to spaces before keyword lookup. Slashes are handled
# earlier by compound expansion, so they are not in this set.
_PUNCT = '.,!?"\'()`:-'
_PUNCT_TABLE = str.maketrans({c: " " for c in _PUNCT})


@dataclass(frozen=True)
class NormalizerConfig:
    category_keywords: dict[str, GestureCategory]
    palm_keywords: dict[str, PalmOrientation]
    refusal_phrases: tuple[str, ...]
    list_separators: tuple[str, ...]
    leading_articles: tuple[str, ...]
    trailing_noise_words: tuple[str, ...]
    semantic_prefix_length: int = 5
    max_compound_expansion: int = 16

    def __post_init__(self) -> None:
        if self.semantic_prefix_length < 1:
            raise ValueError("semantic_prefix_length must be >= 1")
        if self.max_compound_expansion < 1:
            raise ValueError("max_compound_expansion must be >= 1")

    @classmethod
    def from_mapping(cls, doc: dict) -> "NormalizerConfig":
        try:
            return cls(
                category_keywords={
                    k: GestureCategory.parse(v)
                    for k, v in doc["category_keywords"].items()
                },
                palm_keywords={
                    k: PalmOrientation.parse(v)
                    for k, v in doc["palm_keywords"].items()
                },
                refusal_phrases=tuple(doc["refusal_phrases"]),
                list_separators=tuple(doc["list_separators"]),
                leading_articles=tuple(doc["leading_articles"]),
                trailing_noise_words=tuple(doc["trailing_noise_words"]),
                semantic_prefix_length=int(doc.get("semantic_prefix_length", 5)),
                max_compound_expansion=int(doc.get("max_compound_expansion", 16)),
            )
        except KeyError as exc:
            raise ParseError(f"normalizer config missing key: {exc}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "NormalizerConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: not valid JSON: {exc}") from None
        return cls.from_mapping(doc)


def default_config() -> NormalizerConfig:
    ref = resources.files("gesturelab.data") / "normalizer_config.json"
    return NormalizerConfig.from_mapping(json.loads(ref.read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ParsedGesture:
    """One candidate reading of a model reply."""

    raw: str
    category: GestureCategory | None
    palm: PalmOrientation | None
    semantic_guess: str


@dataclass(frozen=True)
class ParseOutcome:
    raw: str
    candidates: tuple[ParsedGesture, ...]
    refusal: bool

    @property
    def unparsed(self) -> bool:
        return not self.candidates


def _tokens(text: str) -> list[str]:
    return normalize_label(text.translate(_PUNCT_TABLE)).split()


def _split_pieces(text: str, config: NormalizerConfig) -> list[str]:
    pieces = [text]
    for sep in config.list_separators:
        nxt: list[str] = []
        for piece in pieces:
            nxt.extend(piece.split(sep))
        pieces = nxt
    return [p for p in (piece.strip() for piece in pieces) if p]


def _expand_compounds(piece: str, config: NormalizerConfig) -> list[str]:
    """Cross-product over slash-joined alternatives, first-mentioned first.

    "negative/negation span/sweep" yields negative span, negative sweep,
    negation span, negation sweep. The expansion is capped so a pathological
    reply cannot blow up candidate counts.
    """
    groups = []
    for token in piece.split():
        alts = [a for a in token.split("/") if a] or [token]
        groups.append(alts)
    expanded = []
    for combo in itertools.product(*groups):
        expanded.append(" ".join(combo))
        if len(expanded) >= config.max_compound_expansion:
            break
    return expanded


def _strip_leading_articles(tokens: list[str], config: NormalizerConfig) -> list[str]:
    out = list(tokens)
    while out and out[0] in config.leading_articles:
        out.pop(0)
    return out


def _extract_candidate(text: str, config: NormalizerConfig) -> ParsedGesture | None:
    tokens = _tokens(text)
    if not tokens:
        return None
    category = None
    category_idx = None
    for i, tok in enumerate(tokens):
        if tok in config.category_keywords:
            category = config.category_keywords[tok]
            category_idx = i
            break
    # Palm orientation is only read after an explicit "palm" mention, so
    # unrelated directional words ("thumbs up") are not mistaken for it.
    palm = None
    if "palm" in tokens or "palms" in tokens:
        anchor = tokens.index("palm") if "palm" in tokens else tokens.index("palms")
        for tok in tokens[anchor + 1 :]:
            if tok in config.palm_keywords:
                palm = config.palm_keywords[tok]
                break
    if category_idx is not None:
        guess_tokens = _strip_leading_articles(tokens[:category_idx], config)
    else:
        guess_tokens = _strip_leading_articles(tokens, config)
        while guess_tokens and guess_tokens[-1] in config.trailing_noise_words:
            guess_tokens.pop()
    return ParsedGesture(
        raw=text,
        category=category,
        palm=palm,
        semantic_guess=" ".join(guess_tokens),
    )


def parse_suggestion(text: str, config: NormalizerConfig | None = None) -> ParseOutcome:
    """Split a reply into candidate gestures.

    Refusal phrases short-circuit to an empty candidate list. List
    separators (commas, semicolons, " or ") yield one candidate per item;
    slash compounds within an item expand to their cross product.
    """
    config = config or default_config()
    lowered = normalize_label(text)
    if any(phrase in lowered for phrase in config.refusal_phrases):
        return ParseOutcome(raw=text, candidates=(), refusal=True)
    candidates: list[ParsedGesture] = []
    for piece in _split_pieces(text, config):
        for variant in _expand_compounds(piece, config):
            cand = _extract_candidate(variant, config)
            if cand is not None:
                candidates.append(cand)
            if len(candidates) >= config.max_compound_expansion:
                break
        if len(candidates) >= config.max_compound_expansion:
            break
    return ParseOutcome(raw=text, candidates=tuple(candidates), refusal=False)


def predicted_category(outcome: ParseOutcome) -> GestureCategory | None:
    """First category any candidate names; None means unparsed."""
    for cand in outcome.candidates:
        if cand.category is not None:
            return cand.category
    return None


class ScoringPolicy(Enum):
    FIRST_ONLY = "first-only"
    ANY_CANDIDATE = "any-candidate"


class MatchKind(Enum):
    EXACT = "exact"
    SEMANTIC_PREFIX = "semantic-prefix"
    COMPOUND_ANY = "compound-any"
    NONE = "none"
    UNPARSED = "unparsed"


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    kind: MatchKind
    candidate_index: int | None


def _prefix_match(guess: str, descriptor: str, n: int) -> tuple[bool, bool]:
    """Whether first tokens agree on their first n characters.

    Returns (matched, via_prefix); via_prefix is False when the guess equals
    the descriptor outright.
    """
    guess_tokens = guess.split()
    desc_tokens = descriptor.split()
    if not guess_tokens or not desc_tokens:
        return False, False
    matched = guess_tokens[0][:n] == desc_tokens[0][:n]
    return matched, matched and guess != descriptor


def _candidate_matches(
    cand: ParsedGesture,
    truth: GestureAnnotation,
    level: SpecLevel,
    config: NormalizerConfig,
) -> tuple[bool, bool]:
    if level is SpecLevel.CATEGORY:
        return cand.category is truth.category, False
    if level is SpecLevel.PHYSICAL:
        return (
            cand.category is truth.category
            and cand.palm is truth.physical.palm_orientation,
            False,
        )
    descriptor = normalize_label(truth.semantic_descriptor)
    if not descriptor:
        raise EmptyDescriptorError(
            f"annotation {truth.id} has no semantic descriptor to score against"
        )
    if level is SpecLevel.SEMANTIC_GESTURE:
        if cand.category is not truth.category:
            return False, False
        return _prefix_match(
            cand.semantic_guess, descriptor, config.semantic_prefix_length
        )
    return _prefix_match(cand.semantic_guess, descriptor, config.semantic_prefix_length)


def _usable_at_level(cand: ParsedGesture, level: SpecLevel) -> bool:
    """Whether a candidate says anything scoreable at this level.

    A reply with no category is unparsed for category and physical scoring,
    but its free text still counts at the semantic levels.
    """
    if level in (SpecLevel.CATEGORY, SpecLevel.PHYSICAL):
        return cand.category is not None
    if level is SpecLevel.SEMANTIC_GESTURE:
        return cand.category is not None or bool(cand.semantic_guess)
    return bool(cand.semantic_guess)


def score_suggestion(
    outcome: ParseOutcome,
    truth: GestureAnnotation,
    level: SpecLevel,
    policy: ScoringPolicy = ScoringPolicy.FIRST_ONLY,
    config: NormalizerConfig | None = None,
) -> MatchResult:
    """Compare parsed candidates against the annotated truth.

    FIRST_ONLY considers only the first usable candidate; ANY_CANDIDATE
    accepts a match anywhere in the list, so its accuracy is never below
    FIRST_ONLY's. No usable candidate at all means unparsed, which mirrors
    the confusion matrix's extra column at the category level.
    """
    config = config or default_config()
    usable = [
        (i, cand)
        for i, cand in enumerate(outcome.candidates)
        if _usable_at_level(cand, level)
    ]
    if not usable:
        return MatchResult(matched=False, kind=MatchKind.UNPARSED, candidate_index=None)
    considered = usable[:1] if policy is ScoringPolicy.FIRST_ONLY else usable
    for pos, (i, cand) in enumerate(considered):
        matched, via_prefix = _candidate_matches(cand, truth, level, config)
        if matched:
            if pos > 0:
                kind = MatchKind.COMPOUND_ANY
            elif via_prefix:
                kind = MatchKind.SEMANTIC_PREFIX
            else:
                kind = MatchKind.EXACT
            return MatchResult(matched=True, kind=kind, candidate_index=i)
    return MatchResult(matched=False, kind=MatchKind.NONE, candidate_index=None)
