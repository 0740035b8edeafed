"""Task and recovery metrics: hit@k, accuracy, balanced accuracy,
n-gram/LCS overlap F1, alignment-with-penalty score, and cosine.

All scores are bounded in [0, 1].  Text metrics tokenize with the shared
tokenizer (case-folded, punctuation standalone).
"""

from __future__ import annotations

import csv
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatchError, EmptyInputError
from .stem import porter_stem
from .textcore import tokenize


def _tokens(text: str) -> List[str]:
    return list(tokenize(text).tokens)


def _f1(overlap: float, len_candidate: int, len_reference: int) -> float:
    if len_candidate == 0 and len_reference == 0:
        return 1.0
    if overlap == 0 or len_candidate == 0 or len_reference == 0:
        return 0.0
    precision = overlap / len_candidate
    recall = overlap / len_reference
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(candidate: str, reference: str, n: int) -> float:
    """F1 over n-gram multiset overlap."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    ct, rt = _tokens(candidate), _tokens(reference)
    cg = Counter(tuple(ct[i : i + n]) for i in range(len(ct) - n + 1))
    rg = Counter(tuple(rt[i : i + n]) for i in range(len(rt) - n + 1))
    overlap = sum((cg & rg).values())
    return _f1(overlap, sum(cg.values()), sum(rg.values()))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_l(candidate: str, reference: str) -> float:
    """F1 over the longest common subsequence."""
    ct, rt = _tokens(candidate), _tokens(reference)
    lcs = _lcs_length(ct, rt)
    return _f1(lcs, len(ct), len(rt))


def load_synonyms(path: str) -> Dict[str, set]:
    """TSV rows of mutually synonymous words -> symmetric lookup table."""
    table: Dict[str, set] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            words = [w.strip().casefold() for w in row if w.strip()]
            for w in words:
                table.setdefault(w, set()).update(x for x in words if x != w)
    return table


def _align(
    candidate: List[str],
    reference: List[str],
    synonyms: Optional[Dict[str, set]],
) -> List[Tuple[int, int]]:
    """Greedy left-to-right matching in stages: exact, stem, synonym."""
    matched_c = [False] * len(candidate)
    matched_r = [False] * len(reference)
    pairs: List[Tuple[int, int]] = []

    def run_stage(equal) -> None:
        for ci, ctok in enumerate(candidate):
            if matched_c[ci]:
                continue
            for ri, rtok in enumerate(reference):
                if matched_r[ri]:
                    continue
                if equal(ctok, rtok):
                    matched_c[ci] = True
                    matched_r[ri] = True
                    pairs.append((ci, ri))
                    break

    run_stage(lambda c, r: c == r)
    run_stage(lambda c, r: porter_stem(c) == porter_stem(r))
    if synonyms:
        run_stage(lambda c, r: r in synonyms.get(c, ()))
    return sorted(pairs)


def _count_chunks(pairs: List[Tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for ci, ri in pairs:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def meteor(
    candidate: str,
    reference: str,
    synonyms: Optional[Dict[str, set]] = None,
) -> float:
    """Unigram alignment score with a fragmentation penalty.

    Fmean = 10PR / (R + 9P); penalty = 0.5 * (chunks / matches)^3;
    score = Fmean * (1 - penalty).  Matching stages: exact, then stem,
    then an optional synonym table.
    """
    ct, rt = _tokens(candidate), _tokens(reference)
    if not ct and not rt:
        return 1.0
    if not ct or not rt:
        return 0.0
    pairs = _align(ct, rt, synonyms)
    matches = len(pairs)
    if matches == 0:
        return 0.0
    precision = matches / len(ct)
    recall = matches / len(rt)
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    chunks = _count_chunks(pairs)
    penalty = 0.5 * (chunks / matches) ** 3
    return fmean * (1.0 - penalty)


def cosine(vec_a: Sequence[float], vec_b: Sequence[float]) -> float:
    """Standard cosine similarity; identical vectors score exactly 1."""
    va, vb = np.asarray(vec_a, dtype=float), np.asarray(vec_b, dtype=float)
    if va.shape != vb.shape:
        raise DimensionMismatchError(
            f"vector dimensions differ: {va.shape} vs {vb.shape}"
        )
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    if np.array_equal(va, vb):
        return 1.0
    return float(np.dot(va, vb) / (na * nb))


def hit_at_k(ranked: Sequence[str], truth, k: int = 10) -> int:
    """1 iff any positive item appears in the top k of the ranking."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not ranked:
        raise EmptyInputError("ranking is empty")
    positives = {truth} if isinstance(truth, str) else set(truth)
    return int(any(item in positives for item in ranked[:k]))


def accuracy(preds: Sequence, labels: Sequence) -> float:
    if not labels or len(preds) != len(labels):
        raise EmptyInputError(
            f"need equal non-empty lists, got {len(preds)} preds / {len(labels)} labels"
        )
    return sum(p == l for p, l in zip(preds, labels)) / len(labels)


def balanced_accuracy(preds: Sequence, labels: Sequence) -> float:
    """Mean of per-class recalls over the classes present in labels."""
    if not labels or len(preds) != len(labels):
        raise EmptyInputError(
            f"need equal non-empty lists, got {len(preds)} preds / {len(labels)} labels"
        )
    totals: Counter = Counter(labels)
    correct: Counter = Counter(l for p, l in zip(preds, labels) if p == l)
    recalls = [correct[c] / totals[c] for c in sorted(totals, key=str)]
    return sum(recalls) / len(recalls)
