"""Tokenization, token-level edit distance, and the text-adjacency relation.

Two texts are adjacent when their token-level Levenshtein distance is at
most ``ceil(rho * max(token counts))``.  The adjacency graph over a unit
set feeds clique decomposition and the constrained obfuscation pass.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Set, Tuple

from .errors import DuplicateIdError

# word runs or single punctuation marks; whitespace never emitted
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

DEFAULT_RHO = 0.15


@dataclass(frozen=True)
class TokenSequence:
    """A normalized token list paired with the string it came from."""

    tokens: Tuple[str, ...]
    source: str

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(text: str) -> TokenSequence:
    """Split text into case-folded word tokens with punctuation standalone.

    Deterministic; empty or all-whitespace input yields an empty sequence.
    """
    tokens = tuple(m.group(0).casefold() for m in _TOKEN_RE.finditer(text))
    return TokenSequence(tokens=tokens, source=text)


@dataclass(frozen=True)
class TextUnit:
    """An atomic piece of private text with its token sequence."""

    uid: str
    text: str
    tokens: TokenSequence

    @classmethod
    def make(cls, uid, text: str) -> "TextUnit":
        return cls(uid=str(uid), text=text, tokens=tokenize(text))


@dataclass(frozen=True)
class AdjacencyConfig:
    """Threshold fraction for the adjacency relation."""

    rho: float = DEFAULT_RHO

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")


def edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Token-level Levenshtein distance with unit-cost edits.

    Accepts raw token lists or TokenSequence instances.
    """
    ta = a.tokens if isinstance(a, TokenSequence) else tuple(a)
    tb = b.tokens if isinstance(b, TokenSequence) else tuple(b)
    if len(ta) > len(tb):
        ta, tb = tb, ta
    previous = list(range(len(ta) + 1))
    for i, tok_b in enumerate(tb, start=1):
        current = [i] + [0] * len(ta)
        for j, tok_a in enumerate(ta, start=1):
            cost = 0 if tok_a == tok_b else 1
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + cost,
            )
        previous = current
    return previous[len(ta)]


def adjacency_threshold(tc_a: int, tc_b: int, rho: float) -> int:
    # round before ceil so 0.15 * 20 == 3.0000000000000004 still maps to 3
    return math.ceil(round(rho * max(tc_a, tc_b), 9))


def is_adjacent(a: TextUnit, b: TextUnit, cfg: AdjacencyConfig) -> bool:
    """True iff edit_distance(a, b) <= ceil(rho * max token count)."""
    threshold = adjacency_threshold(len(a.tokens), len(b.tokens), cfg.rho)
    # length gap is a lower bound on edit distance; skip the DP when it
    # already exceeds the threshold
    if abs(len(a.tokens) - len(b.tokens)) > threshold:
        return False
    return edit_distance(a.tokens, b.tokens) <= threshold


@dataclass
class AdjacencyGraph:
    """Undirected graph over unit ids; an edge means the units are adjacent."""

    nodes: List[str]
    edges: Set[Tuple[str, str]]
    rho: float
    units: Dict[str, TextUnit] = field(default_factory=dict)

    def has_edge(self, a: str, b: str) -> bool:
        if a == b:
            return False
        key = (a, b) if a <= b else (b, a)
        return key in self.edges

    def neighbors(self, node: str) -> Set[str]:
        out = set()
        for x, y in self.edges:
            if x == node:
                out.add(y)
            elif y == node:
                out.add(x)
        return out

    def neighbor_map(self) -> Dict[str, Set[str]]:
        out: Dict[str, Set[str]] = {n: set() for n in self.nodes}
        for x, y in self.edges:
            out[x].add(y)
            out[y].add(x)
        return out


def build_adjacency_graph(units: Iterable[TextUnit], cfg: AdjacencyConfig) -> AdjacencyGraph:
    """Pairwise adjacency evaluation with deterministic node ordering by id."""
    unit_list = list(units)
    ids = [u.uid for u in unit_list]
    if len(set(ids)) != len(ids):
        seen, dupes = set(), []
        for uid in ids:
            if uid in seen:
                dupes.append(uid)
            seen.add(uid)
        raise DuplicateIdError(f"duplicate unit ids: {dupes}")
    ordered = sorted(unit_list, key=lambda u: u.uid)
    edges: Set[Tuple[str, str]] = set()
    for i, ua in enumerate(ordered):
        for ub in ordered[i + 1:]:
            if is_adjacent(ua, ub, cfg):
                edges.add((ua.uid, ub.uid))
    return AdjacencyGraph(
        nodes=[u.uid for u in ordered],
        edges=edges,
        rho=cfg.rho,
        units={u.uid: u for u in ordered},
    )
