"""Shared fixtures: corpora, mock gateways, and prerecorded caches."""

from __future__ import annotations

import pytest

from gesturelab.corpus import Corpus, load_corpus, load_reference_corpus, mini_corpus_path
from gesturelab.gateway import (
    CacheStore,
    MockProvider,
    ModelConfig,
    ModelGateway,
    ProviderKind,
    make_gateway,
)

MOCK_MODEL = "mock-chat"


@pytest.fixture(scope="session")
def reference_corpus() -> Corpus:
    return load_reference_corpus()


@pytest.fixture(scope="session")
def mini_corpus() -> Corpus:
    return load_corpus(mini_corpus_path())


@pytest.fixture
def mock_config() -> ModelConfig:
    return ModelConfig(model_name=MOCK_MODEL)


@pytest.fixture
def mock_gateway(tmp_path, mock_config) -> ModelGateway:
    return make_gateway(ProviderKind.MOCK, mock_config, tmp_path / "cache")


def scripted_gateway(cache_root, replies: dict[str, str], default: str = "span") -> ModelGateway:
    """Mock gateway whose completion text is looked up by prompt substring.

    The first key found inside the prompt wins; order follows the mapping.
    """

    def complete(prompt: str) -> str:
        for needle, reply in replies.items():
            if needle in prompt:
                return reply
        return default

    config = ModelConfig(model_name=MOCK_MODEL)
    return ModelGateway(config, CacheStore(cache_root), MockProvider(config, complete))
