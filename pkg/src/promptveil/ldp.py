"""Clique decomposition and bounded-ratio post-sampling of obfuscations.

Each clique shares an obfuscation support set; a node keeps its own
obfuscation with probability e^eps / (e^eps + k - 1) and takes each
neighbor's with probability 1 / (e^eps + k - 1), so every pointwise
probability ratio is bounded by e^eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Set, Tuple

import numpy as np

from .textcore import AdjacencyGraph

DEFAULT_EPSILON_LDP = 10.0

# exact branch-and-bound clique search up to this many nodes; greedy beyond
MAX_EXACT_NODES = 64


def _neighbor_sets(graph: AdjacencyGraph) -> Dict[str, Set[str]]:
    return graph.neighbor_map()


def _exact_max_clique(nodes: List[str], adj: Mapping[str, Set[str]]) -> Tuple[str, ...]:
    """Branch and bound with pivoting; ties resolved toward the
    lexicographically smallest sorted node-id tuple."""
    best: Tuple[str, ...] = (nodes[0],) if nodes else ()

    def expand(r: List[str], p: List[str], x: List[str]) -> None:
        nonlocal best
        if not p and not x:
            clique = tuple(sorted(r))
            if len(clique) > len(best) or (len(clique) == len(best) and clique < best):
                best = clique
            return
        if len(r) + len(p) < len(best):
            return
        pivot = max(p + x, key=lambda u: (len(adj[u] & set(p)), u))
        for v in [u for u in p if u not in adj[pivot]]:
            expand(
                r + [v],
                [u for u in p if u in adj[v]],
                [u for u in x if u in adj[v]],
            )
            p = [u for u in p if u != v]
            x = x + [v]

    expand([], sorted(nodes), [])
    return best


def _greedy_max_clique(nodes: List[str], adj: Mapping[str, Set[str]]) -> Tuple[str, ...]:
    order = sorted(nodes, key=lambda n: (-len(adj[n]), n))
    clique: List[str] = []
    for node in order:
        if all(node in adj[c] for c in clique):
            clique.append(node)
    return tuple(sorted(clique))


def max_clique(graph: AdjacencyGraph) -> Tuple[str, ...]:
    """A maximum clique (exact up to MAX_EXACT_NODES nodes, greedy beyond),
    as a sorted node-id tuple."""
    clique, _ = _max_clique_flagged(list(graph.nodes), _neighbor_sets(graph))
    return clique


def _max_clique_flagged(
    nodes: List[str], adj: Mapping[str, Set[str]]
) -> Tuple[Tuple[str, ...], bool]:
    if not nodes:
        return (), True
    if len(nodes) <= MAX_EXACT_NODES:
        return _exact_max_clique(nodes, adj), True
    return _greedy_max_clique(nodes, adj), False


@dataclass
class CliquePartition:
    """Disjoint cliques covering all nodes, in extraction order."""

    cliques: List[Tuple[str, ...]]
    approximate: bool = False

    def all_nodes(self) -> Set[str]:
        out: Set[str] = set()
        for clique in self.cliques:
            out.update(clique)
        return out


def clique_decompose(graph: AdjacencyGraph) -> CliquePartition:
    """Repeatedly extract the maximum clique; once the best clique found
    has size 1, every remaining node becomes a singleton."""
    adj = _neighbor_sets(graph)
    remaining = set(graph.nodes)
    cliques: List[Tuple[str, ...]] = []
    approximate = False
    while remaining:
        sub_adj = {n: adj[n] & remaining for n in remaining}
        clique, exact = _max_clique_flagged(sorted(remaining), sub_adj)
        approximate = approximate or not exact
        if len(clique) <= 1:
            cliques.extend((n,) for n in sorted(remaining))
            break
        cliques.append(clique)
        remaining -= set(clique)
    return CliquePartition(cliques=cliques, approximate=approximate)


@dataclass
class SamplingPlan:
    """Per-node distributions over a clique's obfuscation support set."""

    clique: Tuple[str, ...]
    support: List[str]  # obfuscation of clique[i] at index i
    epsilon_ldp: float
    distributions: Dict[str, List[float]] = field(default_factory=dict)

    def draw(self, node: str, rng: np.random.Generator) -> str:
        probs = self.distributions[node]
        r = rng.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if r < acc:
                return self.support[i]
        return self.support[-1]

    def max_ratio(self) -> float:
        """Enumerated max over node pairs and outputs of P_i(s)/P_j(s)."""
        worst = 1.0
        nodes = list(self.clique)
        for i in nodes:
            for j in nodes:
                for s in range(len(self.support)):
                    pi = self.distributions[i][s]
                    pj = self.distributions[j][s]
                    if pj > 0.0:
                        worst = max(worst, pi / pj)
        return worst


def build_sampling_plan(
    clique: Sequence[str],
    obfuscations: Mapping[str, str],
    epsilon_ldp: float,
) -> SamplingPlan:
    """Self-probability e^eps/(e^eps + k - 1); all others equal."""
    if epsilon_ldp < 0.0:
        raise ValueError(f"epsilon_ldp must be >= 0, got {epsilon_ldp}")
    nodes = sorted(clique)
    k = len(nodes)
    support = [obfuscations[n] for n in nodes]
    if k == 1:
        return SamplingPlan(
            clique=tuple(nodes),
            support=support,
            epsilon_ldp=epsilon_ldp,
            distributions={nodes[0]: [1.0]},
        )
    e_eps = math.exp(epsilon_ldp)
    denom = e_eps + (k - 1)
    p_other = 1.0 / denom
    p_self = e_eps * p_other
    # float product may overshoot the e^eps ratio bound by a few ulps
    while p_self / p_other > e_eps:
        p_self = math.nextafter(p_self, 0.0)
    distributions = {}
    for i, node in enumerate(nodes):
        probs = [p_other] * k
        probs[i] = p_self
        distributions[node] = probs
    return SamplingPlan(
        clique=tuple(nodes),
        support=support,
        epsilon_ldp=epsilon_ldp,
        distributions=distributions,
    )


def post_sample_all(
    partition: CliquePartition,
    obfuscations: Mapping[str, str],
    epsilon_ldp: float,
    seed: int,
) -> Dict[str, str]:
    """One fixed draw per node, reused for all subsequent inferences.

    Each clique samples from an independent sub-stream derived from
    (seed, clique index), so results are reproducible bit-for-bit.
    """
    final: Dict[str, str] = {}
    for clique_index, clique in enumerate(partition.cliques):
        plan = build_sampling_plan(clique, obfuscations, epsilon_ldp)
        rng = np.random.default_rng([seed, clique_index])
        for node in plan.clique:
            final[node] = plan.draw(node, rng)
    return final
