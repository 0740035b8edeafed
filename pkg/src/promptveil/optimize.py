"""Automatic obfuscation-instruction search with checkpointed early stopping.

Two procedures: iterative candidate batches seeded from the top two
prompts of the previous round, and a sequential search whose meta prompt
accumulates every (prompt, score) pair seen so far.  Candidates are
evaluated sample by sample and abandoned after two consecutive losing
50-sample checkpoints.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

from .errors import ConfigError
from .providers import ChatProvider, OBFUSCATION_TEMPERATURE
from .scoring import TokenOverlapScorer

CHECKPOINT_INTERVAL = 50
LOSING_CHECKPOINTS_TO_STOP = 2
APE_ITERATIONS = 6
APE_CANDIDATES_PER_ITER = 7
APE_SEED_COUNT = 2
OPRO_MAX_ITERATIONS = 40
OPRO_INITIAL_PROMPTS = 3
SEED_DISTINCTNESS_CAP = 0.9
VALIDATION_RESERVE = 1000

# evaluator(prompt, sample) -> per-sample score in [0, 1]
Evaluator = Callable[[str, object], float]


class PromptGenerator(Protocol):
    def generate(
        self, meta_prompt: str, seeds: Sequence[Tuple[str, float]], n: int
    ) -> List[str]:
        ...


@dataclass
class CandidateResult:
    text: str
    score: float
    samples_evaluated: int
    stopped: bool


@dataclass
class IterationTrace:
    candidates: List[CandidateResult]
    best_text: str
    best_score: float


@dataclass
class SearchTrace:
    iterations: List[IterationTrace] = field(default_factory=list)
    best_text: str = ""
    best_score: float = -math.inf
    meta_prompts: List[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "best_text": self.best_text,
                "best_score": self.best_score,
                "iterations": [
                    {
                        "best_text": it.best_text,
                        "best_score": it.best_score,
                        "candidates": [
                            {
                                "text": c.text,
                                "score": c.score,
                                "samples_evaluated": c.samples_evaluated,
                                "stopped": c.stopped,
                            }
                            for c in it.candidates
                        ],
                    }
                    for it in self.iterations
                ],
            },
            ensure_ascii=False,
        )


def early_stop_evaluate(
    prompt: str,
    validation: Sequence,
    best_mean: Optional[float],
    evaluator: Evaluator,
    checkpoint: int = CHECKPOINT_INTERVAL,
) -> Tuple[float, bool, int]:
    """Sequential evaluation with losing-checkpoint abort.

    At every checkpoint the running mean is compared to best_mean; two
    consecutive losing checkpoints abort the run.  Returns (mean over
    evaluated samples, stopped, samples evaluated).
    """
    if not validation:
        raise ValueError("validation set is empty")
    total = 0.0
    consecutive_losses = 0
    for count, sample in enumerate(validation, start=1):
        total += evaluator(prompt, sample)
        if count % checkpoint == 0 and best_mean is not None:
            running_mean = total / count
            if running_mean < best_mean:
                consecutive_losses += 1
                if consecutive_losses >= LOSING_CHECKPOINTS_TO_STOP:
                    return running_mean, True, count
            else:
                consecutive_losses = 0
    return total / len(validation), False, len(validation)


def _evaluate_candidates(
    candidates: Sequence[str],
    validation: Sequence,
    evaluator: Evaluator,
    best_score: float,
    checkpoint: int,
) -> List[CandidateResult]:
    results = []
    best_mean = None if best_score == -math.inf else best_score
    for text in candidates:
        score, stopped, samples = early_stop_evaluate(
            text, validation, best_mean, evaluator, checkpoint
        )
        results.append(
            CandidateResult(
                text=text, score=score, samples_evaluated=samples, stopped=stopped
            )
        )
    return results


def _iteration_best(results: Sequence[CandidateResult]) -> Tuple[str, float]:
    best = max(range(len(results)), key=lambda i: (results[i].score, -i))
    return results[best].text, results[best].score


def ape_search(
    meta_prompt: str,
    validation: Sequence,
    evaluator: Evaluator,
    generator: PromptGenerator,
    iterations: int = APE_ITERATIONS,
    candidates_per_iter: int = APE_CANDIDATES_PER_ITER,
    checkpoint: int = CHECKPOINT_INTERVAL,
) -> Tuple[str, SearchTrace]:
    """Batched search: each round generates candidates seeded from the top
    two prompts of the round just finished; only full (non-stopped)
    evaluations can claim the global best."""
    trace = SearchTrace()
    seeds: List[Tuple[str, float]] = []
    for _ in range(iterations):
        candidates = generator.generate(meta_prompt, seeds, candidates_per_iter)
        results = _evaluate_candidates(
            candidates, validation, evaluator, trace.best_score, checkpoint
        )
        for r in results:
            if not r.stopped and r.score > trace.best_score:
                trace.best_score = r.score
                trace.best_text = r.text
        it_text, it_score = _iteration_best(results)
        trace.iterations.append(
            IterationTrace(candidates=results, best_text=it_text, best_score=it_score)
        )
        ranked = sorted(
            range(len(results)), key=lambda i: (-results[i].score, i)
        )[:APE_SEED_COUNT]
        seeds = [(results[i].text, results[i].score) for i in ranked]
    return trace.best_text, trace


def _distinct_enough(prompts: Sequence[str], cap: float = SEED_DISTINCTNESS_CAP) -> bool:
    scorer = TokenOverlapScorer()
    for i in range(len(prompts)):
        for j in range(i + 1, len(prompts)):
            if scorer.score(prompts[i], prompts[j]) > cap:
                return False
    return True


def _render_opro_meta(meta_prompt: str, history: Sequence[Tuple[str, float]]) -> str:
    lines = [meta_prompt, ""]
    for text, score in history:
        lines.append(f"Prompt: {text}")
        lines.append(f"Score: {score:.4f}")
    return "\n".join(lines)


def opro_search(
    meta_prompt: str,
    validation: Sequence,
    evaluator: Evaluator,
    generator: PromptGenerator,
    max_iterations: int = OPRO_MAX_ITERATIONS,
    initial_prompts: int = OPRO_INITIAL_PROMPTS,
    checkpoint: int = CHECKPOINT_INTERVAL,
) -> Tuple[str, SearchTrace]:
    """Sequential search: seeds are scored in full, then each iteration
    appends all known (prompt, score) pairs to the meta prompt and requests
    one new prompt, scored with early stopping."""
    trace = SearchTrace()
    seeds = generator.generate(meta_prompt, [], initial_prompts)
    for _ in range(10):
        if len(set(seeds)) == initial_prompts and _distinct_enough(seeds):
            break
        seeds = generator.generate(meta_prompt, [], initial_prompts)
    else:
        raise ConfigError(
            f"generator failed to produce {initial_prompts} distinct seed prompts"
        )
    history: List[Tuple[str, float]] = []
    seed_results = []
    for text in seeds:
        score, stopped, samples = early_stop_evaluate(
            text, validation, None, evaluator, checkpoint
        )
        seed_results.append(
            CandidateResult(text=text, score=score, samples_evaluated=samples, stopped=stopped)
        )
        history.append((text, score))
        if score > trace.best_score:
            trace.best_score = score
            trace.best_text = text
    it_text, it_score = _iteration_best(seed_results)
    trace.iterations.append(
        IterationTrace(candidates=seed_results, best_text=it_text, best_score=it_score)
    )
    for _ in range(max_iterations):
        rendered = _render_opro_meta(meta_prompt, history)
        trace.meta_prompts.append(rendered)
        new_prompts = generator.generate(rendered, history, 1)
        if not new_prompts:
            break
        text = new_prompts[0]
        score, stopped, samples = early_stop_evaluate(
            text, validation, trace.best_score, evaluator, checkpoint
        )
        result = CandidateResult(
            text=text, score=score, samples_evaluated=samples, stopped=stopped
        )
        history.append((text, score))
        if not stopped and score > trace.best_score:
            trace.best_score = score
            trace.best_text = text
        trace.iterations.append(
            IterationTrace(
                candidates=[result],
                best_text=trace.best_text,
                best_score=trace.best_score,
            )
        )
    return trace.best_text, trace


@dataclass
class ProviderPromptGenerator:
    """Chat-provider-backed generator: one completion per requested prompt."""

    provider: ChatProvider
    temperature: float = OBFUSCATION_TEMPERATURE

    def generate(
        self, meta_prompt: str, seeds: Sequence[Tuple[str, float]], n: int
    ) -> List[str]:
        seed_block = ""
        if seeds:
            lines = [f"Strong prompt (score {s:.4f}): {t}" for t, s in seeds]
            seed_block = "\n\n" + "\n".join(lines)
        out = []
        for i in range(n):
            out.append(
                self.provider.chat(
                    system=meta_prompt + seed_block,
                    user=f"Produce candidate instruction {i + 1} of {n}.",
                    temperature=self.temperature,
                ).strip()
            )
        return out
