"""Request/response types and the chain-of-thought wire format.

The CoT block is plain text:

    PREMISES:
    - <premise>
    STEPS:
    - <step>
    ANSWER: true|false

A malformed block is not an error; it parses to None and the engine treats
it as an implicit domain violation feeding the retry loop.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from sicql.lang.ast import ValueType

CONTRACT_TEXT = "text"
CONTRACT_TYPED = "typed"
CONTRACT_BOOL_COT = "bool+cot"

JUDGE_MODES = ("fact-check", "relevance", "soundness-steps", "semantic-match")


@dataclass(frozen=True)
class CoT:
    premises: tuple[str, ...]
    steps: tuple[str, ...]


@dataclass
class ModelRequest:
    prompt: str
    contract: str = CONTRACT_TEXT
    out_type: ValueType | None = None
    fields: dict[str, str] = field(default_factory=dict)  # rendered placeholder values
    masks: tuple = ()  # automata constraining the decode
    guard: object | None = None  # StreamGuard for per-segment checks
    seed: int = 0
    attempt: int = 0
    op_alias: str = ""


@dataclass
class ModelResponse:
    text: str
    cot: CoT | None = None
    answer: str | None = None  # ANSWER line of a CoT block
    confidence: float | None = None
    tokens: tuple[str, ...] | None = None
    cost: float = 0.0
    guard_backtracks: int = 0
    guard_violation: object | None = None  # CheckOutcome surfaced by a fail-mode guard


@dataclass(frozen=True)
class JudgeResult:
    verdict: bool
    confidence: float | None = None
    rationale: str = ""
    cost: float = 0.0


_ANSWER_RE = re.compile(r"^ANSWER:\s*(.+)\s*$", re.MULTILINE)


def parse_cot(text: str) -> tuple[CoT | None, str | None]:
    """Parse the structured block; ``(None, None)`` when malformed."""
    if "PREMISES:" not in text:
        return None, None
    premises_part = text.split("PREMISES:", 1)[1]
    if "STEPS:" not in premises_part:
        return None, None
    premises_text, steps_part = premises_part.split("STEPS:", 1)
    m = _ANSWER_RE.search(steps_part)
    if not m:
        return None, None
    steps_text = steps_part[: m.start()]
    answer = m.group(1).strip()
    return CoT(premises=_bullets(premises_text), steps=_bullets(steps_text)), answer


def _bullets(block: str) -> tuple[str, ...]:
    items = []
    for line in block.splitlines():
        line = line.strip()
        if line.startswith("- "):
            items.append(line[2:].strip())
        elif line.startswith("-"):
            items.append(line[1:].strip())
    return tuple(i for i in items if i)


def parse_bool(text: str) -> bool | None:
    """Lenient true/false extraction; None when unparseable."""
    s = text.strip().lower()
    if s in ("true", "false"):
        return s == "true"
    return None
