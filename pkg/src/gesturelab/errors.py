"""Exception hierarchy shared across the pipeline.

Every error carries an ``exit_code`` so the CLI can map failures to stable,
machine-checkable process exit codes without a separate lookup table.
"""

from __future__ import annotations


class GestureLabError(Exception):
    """Base class for all package errors."""

    exit_code = 1


# --- corpus ---------------------------------------------------------------

class CorpusError(GestureLabError):
    exit_code = 3


class ParseError(CorpusError):
    """Corpus document is malformed (bad syntax or record shape)."""


class ValidationError(CorpusError):
    """A record violates an annotation invariant; message names id and field."""


class EmptyCorpusError(CorpusError):
    """Operation requires a non-empty corpus."""


# --- prompt building ------------------------------------------------------

class PromptError(GestureLabError):
    exit_code = 3


class UnknownTargetError(PromptError):
    """Target id does not occur in the corpus."""


class InsufficientExamplesError(PromptError):
    """A category has fewer non-target annotations than the plan requires."""


class MissingGestureLabelError(PromptError):
    """Probe kind requires a gesture label but none was given."""


# --- gateway --------------------------------------------------------------

class GatewayError(GestureLabError):
    exit_code = 4


class TransportError(GatewayError):
    """Request failed after exhausting retries."""


class RateLimitedError(TransportError):
    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class CacheMissError(GatewayError):
    """Replay or mock provider has no entry for the requested digest."""


class ProviderRefusalError(GatewayError):
    """Provider returned an empty or blocked response; carries the record."""

    def __init__(self, message: str, record=None):
        super().__init__(message)
        self.record = record


class DimensionMismatchError(GatewayError):
    """Embedding dimensions are inconsistent."""


# --- normalization --------------------------------------------------------

class EmptyDescriptorError(GestureLabError):
    exit_code = 3


# --- evaluation -----------------------------------------------------------

class EvalError(GestureLabError):
    exit_code = 6


class WrongLevelError(EvalError):
    """Operation only applies to category or physical specification runs."""


class EmptyRunError(EvalError):
    pass


class MissingTargetError(EvalError):
    """A run record references a target absent from the corpus."""


class DuplicateFinalLabelError(EvalError):
    """Two final appropriateness labels exist for one (run, target)."""


class ZeroVectorError(EvalError):
    """Cosine similarity is undefined for a zero vector."""


class EmptyDictionaryError(EvalError):
    pass


# --- experiment runner ----------------------------------------------------

class RunnerError(GestureLabError):
    exit_code = 5


class ConfigError(RunnerError):
    pass


class ManifestCorruptError(RunnerError):
    pass


class ExperimentError(RunnerError):
    """Run produced zero successful records."""
