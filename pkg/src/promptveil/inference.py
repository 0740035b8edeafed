"""Inference prompt assembly and output validation.

A prompt is (task instruction, optional enumerated output set, payload).
Inference runs at temperature 0.  Closed-set outputs are normalized and
matched case-insensitively; ranking outputs keep only candidate-set
members; open-text outputs pass through.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

from .errors import UnparseableOutputError
from .providers import ChatProvider, INFERENCE_TEMPERATURE

logger = logging.getLogger("promptveil.inference")

# leading enumeration markers in ranking output lines: "3.", "2)", "-"
_RANK_PREFIX_RE = re.compile(r"^\s*(?:\d+\s*[.):-]|[-*•])\s*")


@dataclass(frozen=True)
class InferencePrompt:
    task_instruction: str
    output_set: tuple
    payload: str

    def body(self) -> str:
        """Everything below the instruction: enumeration block plus payload."""
        parts: List[str] = []
        if self.output_set:
            lines = [f"{i}. {label}" for i, label in enumerate(self.output_set, start=1)]
            parts.append("Allowed outputs:\n" + "\n".join(lines))
        parts.append("Input:\n" + self.payload)
        return "\n\n".join(parts)

    def render(self) -> str:
        return self.task_instruction + "\n\n" + self.body()


def assemble_prompt(
    tp_t: str,
    s_t: Optional[Sequence[str]],
    u_i: str,
) -> InferencePrompt:
    if not tp_t or not tp_t.strip():
        raise ValueError("task instruction must be non-empty")
    return InferencePrompt(
        task_instruction=tp_t.strip(),
        output_set=tuple(s_t or ()),
        payload=u_i,
    )


def _normalize(text: str) -> str:
    out = text.strip().casefold()
    # trim surrounding punctuation so " Positive." matches "positive"
    return out.strip(" \t\r\n.,;:!?\"'`()[]{}")


def parse_output(
    raw: str,
    s_t: Optional[Sequence[str]],
    ranking: bool = False,
) -> Union[str, List[str]]:
    """Validate raw inference output against the output set.

    Closed sets return the matching set member; rankings return the ordered
    members found (hallucinated items dropped and logged); an empty output
    set passes the raw text through.
    """
    members = list(s_t or ())
    if not members:
        return raw
    canonical = {_normalize(m): m for m in members}
    if ranking:
        items: List[str] = []
        seen = set()
        for line in raw.replace(",", "\n").splitlines():
            key = _normalize(_RANK_PREFIX_RE.sub("", line))
            if not key:
                continue
            if key in canonical:
                member = canonical[key]
                if member not in seen:
                    seen.add(member)
                    items.append(member)
            else:
                logger.info("dropped item outside candidate set: %r", line.strip())
        return items
    key = _normalize(raw)
    if key in canonical:
        return canonical[key]
    raise UnparseableOutputError(raw)


def infer(
    provider: ChatProvider,
    prompt: InferencePrompt,
    temperature: float = INFERENCE_TEMPERATURE,
) -> str:
    """One inference completion: instruction as system, body as user."""
    return provider.chat(
        system=prompt.task_instruction,
        user=prompt.body(),
        temperature=temperature,
    )
