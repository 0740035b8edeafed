"""Clause-level obfuscation for unstructured text.

Text is segmented into clauses, the clause list is shuffled so providers
see requests out of order, each clause is obfuscated in its own isolated
request, and results are recombined in the original clause order.  Only
individual clauses ever leave the process.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .engine import ObfuscationConfig, generate_candidate
from .providers import ChatProvider

MIN_CLAUSE_TOKENS = 3

# sentence boundary: terminal punctuation run followed by whitespace
_SENTENCE_RE = re.compile(r"(?<=[.!?…])\s+")
_WORD_RE = re.compile(r"\w+", re.UNICODE)
# sub-split candidates: clause delimiters or coordinating conjunctions
_DELIM_RE = re.compile(r"[,;]")
_CONJ_RE = re.compile(r"\b(for|and|nor|but|or|yet|so)\b", re.IGNORECASE)

CLAUSE_SEPARATOR = " "


@dataclass
class ClauseList:
    clauses: List[str]
    permutation: List[int]  # shuffled[i] == original[permutation[i]]
    source_id: Optional[str] = None


def _word_count(text: str) -> int:
    return len(_WORD_RE.findall(text))


def _split_sentence(sentence: str, min_tokens: int) -> List[str]:
    """Greedy left-to-right sub-splits at delimiters and conjunctions.

    A split commits only when both sides keep at least min_tokens word
    tokens; delimiters are consumed, conjunctions stay with the right side.
    """
    candidates = []
    for m in _DELIM_RE.finditer(sentence):
        candidates.append((m.start(), m.end(), "delim"))
    for m in _CONJ_RE.finditer(sentence):
        candidates.append((m.start(), m.start(), "conj"))
    candidates.sort()
    clauses = []
    seg_start = 0
    for start, resume, _kind in candidates:
        if start < seg_start:
            continue
        left = sentence[seg_start:start]
        right = sentence[resume:]
        if _word_count(left) >= min_tokens and _word_count(right) >= min_tokens:
            clauses.append(left.strip())
            seg_start = resume
    tail = sentence[seg_start:].strip()
    if tail:
        clauses.append(tail)
    return clauses


def segment_clauses(
    text: str,
    min_clause_tokens: int = MIN_CLAUSE_TOKENS,
    source_id: Optional[str] = None,
) -> ClauseList:
    """Sentence split at terminal punctuation, then rule-based sub-splits.

    Degenerate short text yields a single clause.
    """
    clauses: List[str] = []
    for sentence in _SENTENCE_RE.split(text):
        sentence = sentence.strip()
        if not sentence:
            continue
        clauses.extend(_split_sentence(sentence, min_clause_tokens))
    if not clauses and text.strip():
        clauses = [text.strip()]
    return ClauseList(
        clauses=clauses,
        permutation=list(range(len(clauses))),
        source_id=source_id,
    )


def shuffle_clauses(clause_list: ClauseList, seed: int) -> ClauseList:
    """Seeded uniform permutation; the permutation is recorded locally and
    never sent to providers."""
    n = len(clause_list.clauses)
    perm = np.random.default_rng(seed).permutation(n).tolist()
    return ClauseList(
        clauses=[clause_list.clauses[i] for i in perm],
        permutation=perm,
        source_id=clause_list.source_id,
    )


def obfuscate_text(
    text: str,
    cfg: ObfuscationConfig,
    provider: ChatProvider,
    min_clause_tokens: int = MIN_CLAUSE_TOKENS,
) -> str:
    """Segment, shuffle, obfuscate each clause in isolation, then recombine
    in the original clause order."""
    segmented = segment_clauses(text, min_clause_tokens)
    shuffled = shuffle_clauses(segmented, cfg.seed)
    obfuscated = [None] * len(shuffled.clauses)
    for position, clause in enumerate(shuffled.clauses):
        obfuscated[shuffled.permutation[position]] = generate_candidate(
            cfg, clause, provider
        )
    return CLAUSE_SEPARATOR.join(obfuscated)
