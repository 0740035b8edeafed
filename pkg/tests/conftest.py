from __future__ import annotations

import pytest

from promptveil.providers import (
    MockChatProvider,
    MockCodebook,
    MockEmbeddingProvider,
)


@pytest.fixture
def codebook():
    return MockCodebook(seed=0)


@pytest.fixture
def mock_chat(codebook):
    return MockChatProvider(codebook=codebook)


@pytest.fixture
def mock_embed():
    return MockEmbeddingProvider(seed=0)


class MappedScorer:
    """Deterministic scorer backed by an explicit pair table."""

    def __init__(self, table=None, default=1.0):
        self.table = dict(table or {})
        self.default = default

    def score(self, a, b):
        if (a, b) in self.table:
            return self.table[(a, b)]
        if (b, a) in self.table:
            return self.table[(b, a)]
        return self.default


@pytest.fixture
def mapped_scorer():
    return MappedScorer
