"""Obfuscation generation and the semantic-alignment constraint pass.

Units are processed in ascending id order.  A candidate is accepted when,
against every already-obfuscated adjacent unit, the obfuscations retain at
least 1/epsilon_sem of the originals' similarity.  After max_attempts
failures the waitlisted candidate with the highest mean obfuscated-side
similarity is accepted and flagged as a fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from .errors import EmptyCompletionError
from .providers import ChatProvider, OBFUSCATION_TEMPERATURE
from .scoring import Scorer
from .textcore import AdjacencyGraph, TextUnit

DEFAULT_EPSILON_SEM = 10.0
DEFAULT_MAX_ATTEMPTS = 10

# provider calls per candidate when completions come back empty
_EMPTY_RETRIES = 3


@dataclass
class ObfuscationConfig:
    instruction: str
    temperature: float = OBFUSCATION_TEMPERATURE
    epsilon_sem: float = DEFAULT_EPSILON_SEM
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    seed: int = 0

    def __post_init__(self):
        if self.epsilon_sem < 1.0:
            raise ValueError(f"epsilon_sem must be >= 1, got {self.epsilon_sem}")
        if self.max_attempts < 1:
            raise ValueError(f"max_attempts must be >= 1, got {self.max_attempts}")
        if self.temperature < 0.0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


@dataclass
class PairwiseCheck:
    adjacent_id: str
    original_sim: float
    obfuscated_sim: float
    passed: bool


@dataclass
class ObfuscationRecord:
    unit_id: str
    original: str
    obfuscated: str
    attempts: int
    fallback: bool
    pairwise_checks: List[PairwiseCheck] = field(default_factory=list)


def generate_candidate(cfg: ObfuscationConfig, text: str, provider: ChatProvider) -> str:
    """One obfuscation completion; retries empty completions up to 3 calls."""
    for _ in range(_EMPTY_RETRIES):
        out = provider.chat(system=cfg.instruction, user=text, temperature=cfg.temperature)
        stripped = out.strip()
        if stripped:
            return stripped
    raise EmptyCompletionError(
        f"provider returned empty completions {_EMPTY_RETRIES} times"
    )


def check_alignment(
    orig_a: str,
    orig_b: str,
    obf_a: str,
    obf_b: str,
    epsilon_sem: float,
    scorer: Scorer,
) -> bool:
    """True iff score(obf_a, obf_b) >= score(orig_a, orig_b) / epsilon_sem."""
    if epsilon_sem < 1.0:
        raise ValueError(f"epsilon_sem must be >= 1, got {epsilon_sem}")
    return scorer.score(obf_a, obf_b) >= scorer.score(orig_a, orig_b) / epsilon_sem


def _check_candidate(
    unit: TextUnit,
    candidate: str,
    done_neighbors: Sequence[ObfuscationRecord],
    epsilon_sem: float,
    scorer: Scorer,
) -> List[PairwiseCheck]:
    checks = []
    for rec in done_neighbors:
        original_sim = scorer.score(unit.text, rec.original)
        obfuscated_sim = scorer.score(candidate, rec.obfuscated)
        checks.append(
            PairwiseCheck(
                adjacent_id=rec.unit_id,
                original_sim=original_sim,
                obfuscated_sim=obfuscated_sim,
                passed=obfuscated_sim >= original_sim / epsilon_sem,
            )
        )
    return checks


def constrained_obfuscate_all(
    units: Sequence[TextUnit],
    graph: AdjacencyGraph,
    cfg: ObfuscationConfig,
    scorer: Scorer,
    provider: ChatProvider,
) -> List[ObfuscationRecord]:
    """Sequential constraint pass over units in ascending id order.

    Transactional: any provider or scorer error propagates and no partial
    result is returned.
    """
    ordered = sorted(units, key=lambda u: u.uid)
    neighbor_map = graph.neighbor_map()
    done: Dict[str, ObfuscationRecord] = {}
    records: List[ObfuscationRecord] = []
    for unit in ordered:
        done_neighbors = [done[n] for n in sorted(neighbor_map.get(unit.uid, ()))
                          if n in done]
        record = None
        waitlist: List[Tuple[str, List[PairwiseCheck], float]] = []
        for attempt in range(1, cfg.max_attempts + 1):
            candidate = generate_candidate(cfg, unit.text, provider)
            checks = _check_candidate(unit, candidate, done_neighbors, cfg.epsilon_sem, scorer)
            if all(c.passed for c in checks):
                record = ObfuscationRecord(
                    unit_id=unit.uid,
                    original=unit.text,
                    obfuscated=candidate,
                    attempts=attempt,
                    fallback=False,
                    pairwise_checks=checks,
                )
                break
            mean_sim = sum(c.obfuscated_sim for c in checks) / len(checks)
            waitlist.append((candidate, checks, mean_sim))
        if record is None:
            # strict > keeps the earliest candidate on equal means
            best_idx = 0
            for i, (_, _, mean_sim) in enumerate(waitlist):
                if mean_sim > waitlist[best_idx][2]:
                    best_idx = i
            candidate, checks, _ = waitlist[best_idx]
            record = ObfuscationRecord(
                unit_id=unit.uid,
                original=unit.text,
                obfuscated=candidate,
                attempts=cfg.max_attempts,
                fallback=True,
                pairwise_checks=checks,
            )
        done[unit.uid] = record
        records.append(record)
    return records
