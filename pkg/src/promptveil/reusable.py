"""Entity-set obfuscation with a persistent store, quantile discretization
for tabular features, and the multi-variant defense against frequency-
matching attacks.

Entities are obfuscated once (graph build, constraint pass, post-sampling)
and reused; user payloads are ordered lists of stored obfuscations and
never contain original text.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .engine import (
    DEFAULT_EPSILON_SEM,
    DEFAULT_MAX_ATTEMPTS,
    ObfuscationConfig,
    constrained_obfuscate_all,
    generate_candidate,
)
from .errors import NonNumericInputError, UnknownEntityError
from .ldp import DEFAULT_EPSILON_LDP, clique_decompose, post_sample_all
from .providers import ChatProvider, EmbeddingProvider, OBFUSCATION_TEMPERATURE
from .scoring import DEFAULT_EMBED_DIM, Scorer, embed_checked, raw_cosine
from .stores import EntityEntry, EntityStore
from .textcore import AdjacencyConfig, DEFAULT_RHO, TextUnit, build_adjacency_graph

DEFAULT_MAX_CARDINALITY = 100
DEFAULT_SIM_CAP = 0.5
DEFAULT_MAX_REGEN = 20


@dataclass
class PipelineConfig:
    instruction: str
    rho: float = DEFAULT_RHO
    epsilon_sem: float = DEFAULT_EPSILON_SEM
    epsilon_ldp: float = DEFAULT_EPSILON_LDP
    temperature: float = OBFUSCATION_TEMPERATURE
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    seed: int = 0

    def obfuscation_config(self) -> ObfuscationConfig:
        return ObfuscationConfig(
            instruction=self.instruction,
            temperature=self.temperature,
            epsilon_sem=self.epsilon_sem,
            max_attempts=self.max_attempts,
            seed=self.seed,
        )


def obfuscate_entity_set(
    entities: Sequence[Tuple[str, str]],
    cfg: PipelineConfig,
    provider: ChatProvider,
    scorer: Scorer,
    task: str = "default",
) -> EntityStore:
    """Graph build, constrained obfuscation, clique post-sampling, store.

    Transactional: provider or scorer failures propagate before any store
    is constructed.
    """
    if not entities:
        raise ValueError("entity list is empty")
    units = [TextUnit.make(uid, text) for uid, text in entities]
    graph = build_adjacency_graph(units, AdjacencyConfig(rho=cfg.rho))
    records = constrained_obfuscate_all(
        units, graph, cfg.obfuscation_config(), scorer, provider
    )
    by_id = {r.unit_id: r for r in records}
    partition = clique_decompose(graph)
    final = post_sample_all(
        partition,
        {r.unit_id: r.obfuscated for r in records},
        cfg.epsilon_ldp,
        cfg.seed,
    )
    entries = {
        uid: EntityEntry(
            uid=uid,
            original=by_id[uid].original,
            obfuscation=final[uid],
            variants=[],
            attempts=by_id[uid].attempts,
            fallback=by_id[uid].fallback,
        )
        for uid in by_id
    }
    return EntityStore(
        task=task,
        entries=entries,
        rho=cfg.rho,
        epsilon_sem=cfg.epsilon_sem,
        epsilon_ldp=cfg.epsilon_ldp,
        seed=cfg.seed,
    )


@dataclass
class UserPayload:
    user_id: Optional[str]
    items: List[str]

    def render(self) -> str:
        return "\n".join(self.items)


def assemble_user_payload(
    history: Sequence[str],
    store: EntityStore,
    user_id: Optional[str] = None,
) -> UserPayload:
    """Ordered obfuscations for a user's interaction history."""
    missing = [uid for uid in history if uid not in store.entries]
    if missing:
        raise UnknownEntityError(missing)
    return UserPayload(
        user_id=user_id,
        items=[store.entries[uid].obfuscation for uid in history],
    )


@dataclass(frozen=True)
class Bin:
    lo: float
    hi: float
    label: str


def discretize_feature(
    values: Sequence,
    max_cardinality: int = DEFAULT_MAX_CARDINALITY,
) -> List[Bin]:
    """Quantile bins when distinct-value count exceeds max_cardinality.

    Duplicate quantile edges collapse, so heavy ties yield fewer bins.
    Bins are labeled "[lo, hi]" from the actual values they contain.
    """
    try:
        data = np.asarray([float(v) for v in values], dtype=float)
    except (TypeError, ValueError) as exc:
        raise NonNumericInputError(f"values must be numeric: {exc}")
    if data.size == 0:
        raise NonNumericInputError("values are empty")
    distinct = np.unique(data)
    if distinct.size <= max_cardinality:
        return [Bin(lo=float(v), hi=float(v), label=f"{v:g}") for v in distinct]
    quantiles = np.quantile(data, np.linspace(0.0, 1.0, max_cardinality + 1))
    edges = np.unique(quantiles)
    bins: List[Bin] = []
    for i in range(len(edges) - 1):
        lo_edge, hi_edge = edges[i], edges[i + 1]
        if i < len(edges) - 2:
            members = data[(data >= lo_edge) & (data < hi_edge)]
        else:
            members = data[(data >= lo_edge) & (data <= hi_edge)]
        if members.size == 0:
            continue
        lo, hi = float(members.min()), float(members.max())
        bins.append(Bin(lo=lo, hi=hi, label=f"[{lo:g}, {hi:g}]"))
    return bins


def assign_bin(value, bins: List[Bin]) -> Bin:
    """Map a value to its bin; values beyond the edges clamp to the ends."""
    v = float(value)
    for b in bins:
        if b.lo <= v <= b.hi:
            return b
    if v < bins[0].lo:
        return bins[0]
    if v > bins[-1].hi:
        return bins[-1]
    # between-bin gap (possible when bins came from sampled data)
    for b in bins:
        if v <= b.hi:
            return b
    return bins[-1]


@dataclass
class MultiObfuscation:
    value: str
    variants: List[str]
    max_pairwise_sim: float
    rounds: int
    flagged: bool  # true when the similarity cap was not achieved


def _max_pairwise_cosine(
    variants: Sequence[str],
    embedder: EmbeddingProvider,
    dim: int,
) -> float:
    vecs = [embed_checked(embedder, v, dim) for v in variants]
    worst = -1.0
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            worst = max(worst, raw_cosine(vecs[i], vecs[j]))
    return worst


def multi_obfuscate_value(
    value: str,
    variant_count: int,
    provider: ChatProvider,
    embedder: EmbeddingProvider,
    instruction: str,
    sim_cap: float = DEFAULT_SIM_CAP,
    max_regen: int = DEFAULT_MAX_REGEN,
    temperature: float = OBFUSCATION_TEMPERATURE,
    dim: int = DEFAULT_EMBED_DIM,
) -> MultiObfuscation:
    """Generate variant_count obfuscations whose pairwise raw cosine stays
    at or under sim_cap, regenerating whole sets up to max_regen rounds.

    If the cap is unachievable the set minimizing the maximum pairwise
    similarity is returned, flagged.
    """
    if not 2 <= variant_count <= 4:
        raise ValueError(f"variant_count must be in [2, 4], got {variant_count}")
    cfg = ObfuscationConfig(instruction=instruction, temperature=temperature)
    best: Optional[Tuple[List[str], float]] = None
    for round_index in range(1, max_regen + 1):
        variants = [
            generate_candidate(cfg, value, provider) for _ in range(variant_count)
        ]
        worst = _max_pairwise_cosine(variants, embedder, dim)
        if best is None or worst < best[1]:
            best = (variants, worst)
        if worst <= sim_cap:
            return MultiObfuscation(
                value=value,
                variants=variants,
                max_pairwise_sim=worst,
                rounds=round_index,
                flagged=False,
            )
    assert best is not None
    return MultiObfuscation(
        value=value,
        variants=best[0],
        max_pairwise_sim=best[1],
        rounds=max_regen,
        flagged=True,
    )


def _row_stream_seed(seed: int, feature: str, row_index: int) -> List[int]:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    return [seed, int.from_bytes(digest, "big"), row_index]


def sample_variant(variants: Sequence[str], seed) -> str:
    """Uniform draw from the variant list under the given seed."""
    if not variants:
        raise ValueError("variants list is empty")
    rng = np.random.default_rng(seed)
    return variants[int(rng.integers(len(variants)))]


def obfuscate_column(
    values: Sequence[str],
    variant_map: Mapping[str, Sequence[str]],
    seed: int,
    feature: str,
) -> List[str]:
    """Per-row uniform variant sampling with a seeded stream per
    (feature, row index)."""
    out: List[str] = []
    for row_index, value in enumerate(values):
        variants = variant_map.get(value)
        if not variants:
            raise UnknownEntityError([value])
        out.append(sample_variant(variants, _row_stream_seed(seed, feature, row_index)))
    return out
