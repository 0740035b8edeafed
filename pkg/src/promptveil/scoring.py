"""Pluggable symmetric text-similarity scorers.

Two implementations: a deterministic token-overlap F1 scorer for offline
tests, and an embedding-cosine scorer backed by any embedding provider.
Raw cosine in [-1, 1] is rescaled to [0, 1] via (c + 1) / 2 so alignment
ratios stay over positive quantities.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import List, Protocol, Sequence

import numpy as np

from .errors import DimensionMismatchError
from .textcore import tokenize

DEFAULT_EMBED_DIM = 200


class Scorer(Protocol):
    def score(self, a: str, b: str) -> float:
        ...


class Embedder(Protocol):
    def embed(self, text: str, dim: int) -> List[float]:
        ...


def embed_checked(embedder: Embedder, text: str, dim: int) -> np.ndarray:
    """Fetch an embedding and verify its length."""
    vec = np.asarray(embedder.embed(text, dim), dtype=float)
    if vec.shape != (dim,):
        raise DimensionMismatchError(
            f"expected dimension {dim}, provider returned {vec.shape}"
        )
    return vec


def raw_cosine(a: Sequence[float], b: Sequence[float]) -> float:
    va, vb = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if va.shape != vb.shape:
        raise DimensionMismatchError(f"vector shapes differ: {va.shape} vs {vb.shape}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    if np.array_equal(va, vb):
        # mathematically 1; sidestep rounding in dot/norm
        return 1.0
    return float(np.dot(va, vb) / (na * nb))


class TokenOverlapScorer:
    """F1 over token multiset overlap; deterministic and offline."""

    def score(self, a: str, b: str) -> float:
        ca = Counter(tokenize(a).tokens)
        cb = Counter(tokenize(b).tokens)
        if not ca and not cb:
            return 1.0
        if not ca or not cb:
            return 0.0
        overlap = sum((ca & cb).values())
        if overlap == 0:
            return 0.0
        precision = overlap / sum(ca.values())
        recall = overlap / sum(cb.values())
        return 2.0 * precision * recall / (precision + recall)


@dataclass
class EmbeddingCosineScorer:
    """Symmetric scorer mapping raw embedding cosine c to (c + 1) / 2."""

    embedder: Embedder
    dim: int = DEFAULT_EMBED_DIM

    def score(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        va = embed_checked(self.embedder, a, self.dim)
        vb = embed_checked(self.embedder, b, self.dim)
        return (raw_cosine(va, vb) + 1.0) / 2.0
