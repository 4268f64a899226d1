"""Gesture suggestion experiments over annotated speech corpora.

The pipeline: load an annotated corpus, build few-shot or zero-shot
prompts, collect model replies through a caching gateway, parse and score
them against the annotations, and serve the results for human review.
"""

from .corpus import (
    Corpus,
    CorpusStats,
    GestureAnnotation,
    GestureCategory,
    PalmOrientation,
    PhysicalGesture,
    compute_stats,
    load_corpus,
    load_reference_corpus,
    save_corpus,
)
from .dictionary import DictionaryMatch, GestureDictionary, match_description
from .errors import GestureLabError
from .evaluate import (
    AppropriatenessValue,
    ConfusionMatrix,
    RunEvaluation,
    chance_baseline,
    cosine_similarity,
    evaluate_run,
    summarize_appropriateness,
)
from .gateway import CacheStore, ModelConfig, ModelGateway, ProviderKind, make_gateway
from .normalize import (
    MatchKind,
    NormalizerConfig,
    ParseOutcome,
    ScoringPolicy,
    parse_suggestion,
    score_suggestion,
)
from .prompts import (
    ExampleOrdering,
    ExamplePlan,
    ProbeKind,
    PromptBundle,
    PromptTemplates,
    SpecLevel,
    build_fewshot,
    build_probe,
    build_zeroshot,
    render_label,
)
from .runner import ExperimentSpec, RunSpec, SuggestionRecord, run_experiment, run_suggestions

__version__ = "0.1.0"

__all__ = [
    "AppropriatenessValue",
    "CacheStore",
    "ConfusionMatrix",
    "Corpus",
    "CorpusStats",
    "DictionaryMatch",
    "ExampleOrdering",
    "ExamplePlan",
    "ExperimentSpec",
    "GestureAnnotation",
    "GestureCategory",
    "GestureDictionary",
    "GestureLabError",
    "MatchKind",
    "ModelConfig",
    "ModelGateway",
    "NormalizerConfig",
    "PalmOrientation",
    "ParseOutcome",
    "PhysicalGesture",
    "ProbeKind",
    "PromptBundle",
    "PromptTemplates",
    "ProviderKind",
    "RunEvaluation",
    "RunSpec",
    "ScoringPolicy",
    "SpecLevel",
    "SuggestionRecord",
    "build_fewshot",
    "build_probe",
    "build_zeroshot",
    "chance_baseline",
    "compute_stats",
    "cosine_similarity",
    "evaluate_run",
    "load_corpus",
    "load_reference_corpus",
    "make_gateway",
    "match_description",
    "parse_suggestion",
    "render_label",
    "run_experiment",
    "run_suggestions",
    "save_corpus",
    "score_suggestion",
    "summarize_appropriateness",
]
