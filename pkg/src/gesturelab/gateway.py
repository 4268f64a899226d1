"""Chat-completion and embedding access with a content-addressed cache.

Requests use the common OpenAI-style wire shape: a single user message to
POST /chat/completions at temperature 0, and POST /embeddings with one input
text per request. Every request body is canonicalized and hashed; the cache
stores the verbatim request and response bodies under that digest, so a
cached experiment replays byte-for-byte with no network access.

Providers:
  * live   - HTTP with bounded retries, writes through the cache
  * replay - cache only, raises on a miss
  * mock   - deterministic synthetic responses, writes through the cache

Refusal detection runs on the response body after retrieval, never at fetch
time, so live and replayed runs fail (or not) identically.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol

import requests

from .errors import (
    CacheMissError,
    ConfigError,
    ProviderRefusalError,
    RateLimitedError,
    TransportError,
)

_API_KEY_VARS = ("GESTURELAB_API_KEY", "OPENAI_API_KEY")


def resolve_api_key(explicit: str | None = None) -> str | None:
    if explicit:
        return explicit
    for var in _API_KEY_VARS:
        value = os.environ.get(var)
        if value:
            return value
    return None


@dataclass(frozen=True)
class ModelConfig:
    model_name: str
    base_url: str = "https://api.openai.com/v1"
    embedding_model: str | None = None
    api_key: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 0.5
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.model_name:
            raise ConfigError("model_name must be non-empty")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


def completion_request_body(config: ModelConfig, prompt: str) -> dict:
    return {
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
    }


def embedding_request_body(config: ModelConfig, text: str) -> dict:
    return {
        "model": config.embedding_model or config.model_name,
        "input": [text],
    }


def canonical_bytes(body: dict) -> bytes:
    """Stable serialization used for hashing and cache storage."""
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def request_digest(body: dict) -> str:
    return hashlib.sha256(canonical_bytes(body)).hexdigest()


class CacheStore:
    """Append-only store keyed by model name and request digest.

    Layout: ``<root>/<model_name>/<digest>/request`` and ``.../response``,
    both verbatim bodies. Entries are never rewritten; a second put for the
    same digest is a no-op so recorded experiments stay stable.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _entry_dir(self, model_name: str, digest: str) -> Path:
        return self.root / model_name / digest

    def get(self, model_name: str, body: dict) -> bytes | None:
        path = self._entry_dir(model_name, request_digest(body)) / "response"
        if not path.is_file():
            return None
        return path.read_bytes()

    def put(self, model_name: str, body: dict, response_body: bytes) -> str:
        digest = request_digest(body)
        entry = self._entry_dir(model_name, digest)
        if (entry / "response").is_file():
            return digest
        entry.mkdir(parents=True, exist_ok=True)
        self._write_atomic(entry / "request", canonical_bytes(body))
        self._write_atomic(entry / "response", response_body)
        return digest

    @staticmethod
    def _write_atomic(path: Path, data: bytes) -> None:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def __contains__(self, key: tuple[str, str]) -> bool:
        model_name, digest = key
        return (self._entry_dir(model_name, digest) / "response").is_file()


class Provider(Protocol):
    def fetch(self, endpoint: str, body: dict) -> bytes:
        """Return the raw response body for a request body."""


class ProviderKind(Enum):
    LIVE = "live"
    REPLAY = "replay"
    MOCK = "mock"


class LiveProvider:
    """HTTP provider with exponential backoff on transient failures.

    429 responses honor Retry-After when present; 5xx and connection errors
    retry with doubling delays. Other 4xx codes fail immediately since
    retrying a bad request cannot help.
    """

    def __init__(
        self,
        config: ModelConfig,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self.session = session or requests.Session()
        self._sleep = sleep

    def fetch(self, endpoint: str, body: dict) -> bytes:
        url = self.config.base_url.rstrip("/") + endpoint
        headers = {"Content-Type": "application/json"}
        key = resolve_api_key(self.config.api_key)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_error = "no attempts made"
        for attempt in range(self.config.max_retries + 1):
            try:
                resp = self.session.post(
                    url,
                    data=canonical_bytes(body),
                    headers=headers,
                    timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                last_error = str(exc)
                self._backoff(attempt, None)
                continue
            if resp.status_code == 200:
                return resp.content
            if resp.status_code == 429:
                retry_after = _parse_retry_after(resp.headers.get("Retry-After"))
                last_error = "rate limited (429)"
                if attempt == self.config.max_retries:
                    raise RateLimitedError(
                        f"{url}: rate limited after {attempt + 1} attempts",
                        retry_after=retry_after,
                    )
                self._backoff(attempt, retry_after)
                continue
            if 500 <= resp.status_code < 600:
                last_error = f"server error {resp.status_code}"
                self._backoff(attempt, None)
                continue
            raise TransportError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
        raise TransportError(
            f"{url}: giving up after {self.config.max_retries + 1} attempts: {last_error}"
        )

    def _backoff(self, attempt: int, retry_after: float | None) -> None:
        if attempt >= self.config.max_retries:
            return
        delay = retry_after if retry_after is not None else self.config.backoff_base * (
            2**attempt
        )
        self._sleep(delay)


def _parse_retry_after(raw: str | None) -> float | None:
    if raw is None:
        return None
    try:
        return max(0.0, float(raw))
    except ValueError:
        return None


class ReplayProvider:
    """Never touches the network; a cache miss is an error."""

    def __init__(self, config: ModelConfig, cache: CacheStore):
        self.config = config
        self.cache = cache

    def fetch(self, endpoint: str, body: dict) -> bytes:
        cached = self.cache.get(body["model"], body)
        if cached is None:
            raise CacheMissError(
                f"no cached response for {body['model']} digest {request_digest(body)}"
            )
        return cached


class MockProvider:
    """Deterministic stand-in for a real endpoint.

    Completion text is chosen by a stable hash of the prompt unless a
    completion_fn overrides it. Embeddings map the sha256 of the input text
    onto 32 components in [-1, 1]. Content-identical requests always get
    byte-identical responses.
    """

    _DEFAULT_REPLIES = (
        "span",
        "container",
        "sweep with palm facing up",
        "sweep with palm facing down",
    )

    def __init__(
        self,
        config: ModelConfig,
        completion_fn: Callable[[str], str] | None = None,
    ):
        self.config = config
        self.completion_fn = completion_fn

    def fetch(self, endpoint: str, body: dict) -> bytes:
        if endpoint == "/chat/completions":
            return self._completion(body)
        if endpoint == "/embeddings":
            return self._embedding(body)
        raise TransportError(f"mock provider has no handler for {endpoint}")

    def _completion(self, body: dict) -> bytes:
        prompt = body["messages"][0]["content"]
        if self.completion_fn is not None:
            text = self.completion_fn(prompt)
        else:
            bucket = hashlib.sha256(prompt.encode("utf-8")).digest()[0]
            text = self._DEFAULT_REPLIES[bucket % len(self._DEFAULT_REPLIES)]
        doc = {
            "id": "mock-" + request_digest(body)[:12],
            "object": "chat.completion",
            "model": body["model"],
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": text},
                    "finish_reason": "stop",
                }
            ],
        }
        return json.dumps(doc, sort_keys=True).encode("utf-8")

    def _embedding(self, body: dict) -> bytes:
        vectors = [mock_embedding(text) for text in body["input"]]
        doc = {
            "object": "list",
            "model": body["model"],
            "data": [
                {"object": "embedding", "index": i, "embedding": vec}
                for i, vec in enumerate(vectors)
            ],
        }
        return json.dumps(doc, sort_keys=True).encode("utf-8")


def mock_embedding(text: str) -> list[float]:
    raw = hashlib.sha256(text.encode("utf-8")).digest()
    return [(b - 127.5) / 127.5 for b in raw]


@dataclass(frozen=True)
class CompletionResult:
    text: str
    digest: str
    model_name: str
    from_cache: bool


@dataclass(frozen=True)
class EmbeddingResult:
    vector: tuple[float, ...]
    digest: str
    model_name: str
    from_cache: bool


class ModelGateway:
    """Cache-through facade over a provider.

    Every call first consults the cache; only a miss reaches the provider,
    and the provider's response is stored before being parsed. Refusal
    checks run on the stored body, so cached refusals raise exactly like
    fresh ones.
    """

    def __init__(self, config: ModelConfig, cache: CacheStore, provider: Provider):
        self.config = config
        self.cache = cache
        self.provider = provider

    def complete(self, prompt: str) -> CompletionResult:
        body = completion_request_body(self.config, prompt)
        raw, from_cache = self._retrieve("/chat/completions", body)
        text = _extract_completion_text(raw)
        return CompletionResult(
            text=text,
            digest=request_digest(body),
            model_name=body["model"],
            from_cache=from_cache,
        )

    def embed(self, text: str) -> EmbeddingResult:
        body = embedding_request_body(self.config, text)
        raw, from_cache = self._retrieve("/embeddings", body)
        vector = _extract_embedding(raw)
        return EmbeddingResult(
            vector=vector,
            digest=request_digest(body),
            model_name=body["model"],
            from_cache=from_cache,
        )

    def embed_many(self, texts: list[str]) -> list[EmbeddingResult]:
        return [self.embed(text) for text in texts]

    def _retrieve(self, endpoint: str, body: dict) -> tuple[bytes, bool]:
        cached = self.cache.get(body["model"], body)
        if cached is not None:
            return cached, True
        raw = self.provider.fetch(endpoint, body)
        self.cache.put(body["model"], body, raw)
        return raw, False


def _extract_completion_text(raw: bytes) -> str:
    try:
        doc = json.loads(raw)
        choices = doc["choices"]
        first = choices[0]
        text = first["message"]["content"]
        finish = first.get("finish_reason")
    except (json.JSONDecodeError, KeyError, IndexError, TypeError):
        raise ProviderRefusalError(
            "response body is not a usable completion", record=raw.decode("utf-8", "replace")
        ) from None
    if finish == "content_filter" or text is None or not text.strip():
        raise ProviderRefusalError(
            f"provider returned no usable text (finish_reason={finish!r})",
            record=raw.decode("utf-8", "replace"),
        )
    return text


def _extract_embedding(raw: bytes) -> tuple[float, ...]:
    try:
        doc = json.loads(raw)
        data = sorted(doc["data"], key=lambda d: d["index"])
        vector = tuple(float(x) for x in data[0]["embedding"])
    except (json.JSONDecodeError, KeyError, IndexError, TypeError, ValueError):
        raise ProviderRefusalError(
            "response body is not a usable embedding",
            record=raw.decode("utf-8", "replace"),
        ) from None
    if not vector:
        raise ProviderRefusalError("provider returned an empty embedding vector")
    return vector


def make_gateway(
    kind: ProviderKind,
    config: ModelConfig,
    cache_root: str | Path,
    session: requests.Session | None = None,
    completion_fn: Callable[[str], str] | None = None,
) -> ModelGateway:
    cache = CacheStore(cache_root)
    if kind is ProviderKind.LIVE:
        provider: Provider = LiveProvider(config, session=session)
    elif kind is ProviderKind.REPLAY:
        provider = ReplayProvider(config, cache)
    else:
        provider = MockProvider(config, completion_fn=completion_fn)
    return ModelGateway(config, cache, provider)
