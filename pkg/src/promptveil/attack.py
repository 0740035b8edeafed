"""Simulated inference attacks and their reports.

LLM-based recovery with editable prompt templates, a random-entities
similarity floor, the frequency-matching attack on tabular columns, and
CSV tooling for human item-identification trials.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import assets
from .errors import DatasetTooSmallError, LengthMismatchError
from .metrics import cosine, meteor, rouge_l, rouge_n
from .providers import ChatProvider, EmbeddingProvider, INFERENCE_TEMPERATURE
from .scoring import DEFAULT_EMBED_DIM, embed_checked

METRIC_NAMES = ("cosine", "rouge-1", "rouge-2", "rouge-l", "meteor")


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.blake2b(blob.encode("utf-8"), digest_size=16).hexdigest()


@dataclass
class AttackReport:
    dataset_id: str
    means: Dict[str, float]
    n: int
    config_hash: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "dataset_id": self.dataset_id,
                "means": self.means,
                "n": self.n,
                "config_hash": self.config_hash,
            },
            sort_keys=True,
        )


def render_recovery_prompt(
    obfuscated: str,
    method_hint: str,
    task_context: str,
    template: Optional[str] = None,
) -> str:
    if template is None:
        template = assets.load("attack_recovery.txt")
    return template.format(
        method_hint=method_hint,
        task_context=task_context,
        obfuscated=obfuscated,
    )


def recover(
    obfuscated: str,
    method_hint: str,
    task_context: str,
    provider: ChatProvider,
    template: Optional[str] = None,
) -> str:
    """One reconstruction attempt; raw completion returned unmodified."""
    prompt = render_recovery_prompt(obfuscated, method_hint, task_context, template)
    return provider.chat(system="", user=prompt, temperature=INFERENCE_TEMPERATURE)


def _pair_metrics(
    original: str,
    recovered: str,
    embedder: EmbeddingProvider,
    dim: int,
) -> Dict[str, float]:
    va = embed_checked(embedder, original, dim)
    vb = embed_checked(embedder, recovered, dim)
    # report values are bounded in [0, 1]; raw cosine may dip below 0
    cos = min(1.0, max(0.0, cosine(va, vb)))
    return {
        "cosine": cos,
        "rouge-1": rouge_n(recovered, original, 1),
        "rouge-2": rouge_n(recovered, original, 2),
        "rouge-l": rouge_l(recovered, original),
        "meteor": meteor(recovered, original),
    }


def evaluate_recovery(
    originals: Sequence[str],
    recovered: Sequence[str],
    embedder: EmbeddingProvider,
    dataset_id: str = "recovery",
    dim: int = DEFAULT_EMBED_DIM,
) -> AttackReport:
    """Mean per-pair metrics between aligned original/recovered lists."""
    if len(originals) != len(recovered):
        raise LengthMismatchError(
            f"{len(originals)} originals vs {len(recovered)} recovered"
        )
    if not originals:
        raise LengthMismatchError("empty input lists")
    sums = {name: 0.0 for name in METRIC_NAMES}
    for orig, rec in zip(originals, recovered):
        for name, value in _pair_metrics(orig, rec, embedder, dim).items():
            sums[name] += value
    n = len(originals)
    return AttackReport(
        dataset_id=dataset_id,
        means={name: sums[name] / n for name in METRIC_NAMES},
        n=n,
        config_hash=_config_hash({"kind": "recovery", "dim": dim}),
    )


def random_entities_baseline(
    dataset: Sequence[str],
    embedder: EmbeddingProvider,
    n_samples: int = 5,
    seed: int = 0,
    dataset_id: str = "baseline",
    dim: int = DEFAULT_EMBED_DIM,
) -> AttackReport:
    """Mean similarity of each entity to n_samples random peers.

    The floor a complete obfuscation should approach; self-pairs are never
    sampled and draws are deterministic under the seed.
    """
    if len(dataset) <= n_samples:
        raise DatasetTooSmallError(
            f"dataset of {len(dataset)} cannot supply {n_samples} peers"
        )
    rng = np.random.default_rng(seed)
    sums = {name: 0.0 for name in METRIC_NAMES}
    for i, entity in enumerate(dataset):
        others = np.array([j for j in range(len(dataset)) if j != i])
        picks = rng.choice(others, size=n_samples, replace=False)
        per_entity = {name: 0.0 for name in METRIC_NAMES}
        for j in picks:
            for name, value in _pair_metrics(entity, dataset[int(j)], embedder, dim).items():
                per_entity[name] += value
        for name in METRIC_NAMES:
            sums[name] += per_entity[name] / n_samples
    n = len(dataset)
    return AttackReport(
        dataset_id=dataset_id,
        means={name: sums[name] / n for name in METRIC_NAMES},
        n=n,
        config_hash=_config_hash(
            {"kind": "random-entities", "n_samples": n_samples, "seed": seed, "dim": dim}
        ),
    )


@dataclass
class DistributionAttackResult:
    mapping: Dict[str, str]
    gaps: Dict[str, float]


def distribution_attack(
    obfuscated_freqs: Mapping[str, float],
    public_freqs: Mapping[str, float],
    tolerance: float,
) -> DistributionAttackResult:
    """Greedy nearest-frequency matching within tolerance.

    Each public value is claimed at most once; obfuscated values with no
    close-enough public frequency stay unmapped.
    """
    for name, freqs in (("obfuscated", obfuscated_freqs), ("public", public_freqs)):
        total = sum(freqs.values())
        if total > 1.0 + 1e-9:
            raise ValueError(f"{name} frequencies sum to {total}, above 1")
    available = dict(public_freqs)
    mapping: Dict[str, str] = {}
    gaps: Dict[str, float] = {}
    for obf in sorted(obfuscated_freqs, key=lambda k: (-obfuscated_freqs[k], k)):
        if not available:
            break
        best = min(
            available,
            key=lambda pub: (abs(obfuscated_freqs[obf] - available[pub]), pub),
        )
        gap = abs(obfuscated_freqs[obf] - available[best])
        if gap <= tolerance:
            mapping[obf] = best
            gaps[obf] = gap
            del available[best]
    return DistributionAttackResult(mapping=mapping, gaps=gaps)


def build_item_identification_csv(
    trials: Sequence[Tuple[str, str]],
    candidate_pool: Sequence[str],
    out_path,
    n_candidates: int = 500,
    seed: int = 0,
) -> Path:
    """Assemble human-trial rows: each obfuscation with an n-way candidate
    list containing the true item at a recorded 1-based answer index."""
    pool = list(dict.fromkeys(candidate_pool))
    if len(pool) < n_candidates:
        raise DatasetTooSmallError(
            f"candidate pool of {len(pool)} cannot fill {n_candidates} slots"
        )
    rng = np.random.default_rng(seed)
    out_path = Path(out_path)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["trial_id", "obfuscation"]
            + [f"candidate_{i}" for i in range(1, n_candidates + 1)]
            + ["answer_index"]
        )
        for trial_id, (obfuscation, true_item) in enumerate(trials, start=1):
            distractor_pool = [c for c in pool if c != true_item]
            picks = rng.choice(
                len(distractor_pool), size=n_candidates - 1, replace=False
            )
            candidates = [true_item] + [distractor_pool[int(i)] for i in picks]
            order = rng.permutation(n_candidates)
            shuffled = [candidates[int(i)] for i in order]
            answer_index = shuffled.index(true_item) + 1
            writer.writerow([trial_id, obfuscation] + shuffled + [answer_index])
    return out_path


def read_answer_key(csv_path) -> Dict[int, int]:
    key: Dict[int, int] = {}
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key[int(row["trial_id"])] = int(row["answer_index"])
    return key


def score_item_responses(key: Mapping[int, int], responses: Mapping[int, int]) -> float:
    """Fraction of trials where the human picked the answer index."""
    if not key:
        raise DatasetTooSmallError("answer key is empty")
    correct = sum(1 for t, ans in key.items() if responses.get(t) == ans)
    return correct / len(key)
