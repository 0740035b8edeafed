"""Privacy-obfuscation middleware: transforms private text into
non-natural-language representations via pluggable LLM providers, with
adjacency-aware alignment constraints, bounded-ratio post-sampling, and
an attack-evaluation harness."""

from __future__ import annotations

__version__ = "0.1.0"

from .engine import (
    ObfuscationConfig,
    ObfuscationRecord,
    check_alignment,
    constrained_obfuscate_all,
    generate_candidate,
)
from .ldp import (
    CliquePartition,
    SamplingPlan,
    build_sampling_plan,
    clique_decompose,
    max_clique,
    post_sample_all,
)
from .scoring import EmbeddingCosineScorer, TokenOverlapScorer
from .textcore import (
    AdjacencyConfig,
    AdjacencyGraph,
    TextUnit,
    TokenSequence,
    build_adjacency_graph,
    edit_distance,
    is_adjacent,
    tokenize,
)

__all__ = [
    "AdjacencyConfig",
    "AdjacencyGraph",
    "CliquePartition",
    "EmbeddingCosineScorer",
    "ObfuscationConfig",
    "ObfuscationRecord",
    "SamplingPlan",
    "TextUnit",
    "TokenOverlapScorer",
    "TokenSequence",
    "build_adjacency_graph",
    "build_sampling_plan",
    "check_alignment",
    "clique_decompose",
    "constrained_obfuscate_all",
    "edit_distance",
    "generate_candidate",
    "is_adjacent",
    "max_clique",
    "post_sample_all",
    "tokenize",
]
