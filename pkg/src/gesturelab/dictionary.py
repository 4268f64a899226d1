"""Matching free-text gesture descriptions against a gesture dictionary.

A dictionary entry is a named, reusable gesture with a physical
description. Matching embeds the query and every entry, takes the highest
cosine similarity, and only accepts it above a threshold; anything below is
reported as novel, together with the nearest entry for context. Because
acceptance is a fixed cutoff on an unchanged score, raising the threshold
can only move results from matched to novel, never the other way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from .corpus import GestureCategory
from .errors import EmptyDictionaryError, ParseError
from .evaluate import cosine_similarity

DEFAULT_THRESHOLD = 0.75

EmbedFn = Callable[[str], Sequence[float]]


@dataclass(frozen=True)
class DictionaryEntry:
    entry_id: str
    name: str
    description: str
    category: GestureCategory | None

    @property
    def embed_text(self) -> str:
        return f"{self.name}: {self.description}"


@dataclass(frozen=True)
class GestureDictionary:
    name: str
    version: str
    entries: tuple[DictionaryEntry, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for entry in self.entries:
            if entry.entry_id in seen:
                raise ParseError(f"duplicate dictionary entry id: {entry.entry_id!r}")
            seen.add(entry.entry_id)

    def get(self, entry_id: str) -> DictionaryEntry | None:
        for entry in self.entries:
            if entry.entry_id == entry_id:
                return entry
        return None

    @classmethod
    def from_mapping(cls, doc: dict) -> "GestureDictionary":
        try:
            entries = tuple(
                DictionaryEntry(
                    entry_id=e["entry_id"],
                    name=e["name"],
                    description=e["description"],
                    category=(
                        GestureCategory.parse(e["category"])
                        if e.get("category") is not None
                        else None
                    ),
                )
                for e in doc["entries"]
            )
            return cls(
                name=doc.get("name", "dictionary"),
                version=doc.get("version", "0"),
                entries=entries,
            )
        except KeyError as exc:
            raise ParseError(f"dictionary entry missing key: {exc}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "GestureDictionary":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: not valid JSON: {exc}") from None
        return cls.from_mapping(doc)


def default_dictionary() -> GestureDictionary:
    ref = resources.files("gesturelab.data") / "gesture_dictionary.json"
    return GestureDictionary.from_mapping(json.loads(ref.read_text(encoding="utf-8")))


@dataclass(frozen=True)
class DictionaryMatch:
    """Nearest entry and whether it cleared the acceptance threshold."""

    entry_id: str | None
    nearest_id: str
    similarity: float
    threshold: float

    @property
    def novel(self) -> bool:
        return self.entry_id is None


def match_description(
    text: str,
    dictionary: GestureDictionary,
    embed_fn: EmbedFn,
    threshold: float = DEFAULT_THRESHOLD,
) -> DictionaryMatch:
    """Nearest dictionary entry by cosine similarity.

    Ties break toward the lexically smallest entry id so results do not
    depend on file order. A best score below the threshold is novel but
    still names the nearest entry.
    """
    if not dictionary.entries:
        raise EmptyDictionaryError(f"dictionary {dictionary.name!r} has no entries")
    query = embed_fn(text)
    best_id: str | None = None
    best_sim = float("-inf")
    for entry in sorted(dictionary.entries, key=lambda e: e.entry_id):
        sim = cosine_similarity(query, embed_fn(entry.embed_text))
        if sim > best_sim:
            best_sim = sim
            best_id = entry.entry_id
    assert best_id is not None
    accepted = best_sim >= threshold
    return DictionaryMatch(
        entry_id=best_id if accepted else None,
        nearest_id=best_id,
        similarity=best_sim,
        threshold=threshold,
    )
