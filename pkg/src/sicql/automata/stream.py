"""Per-segment streaming checks with backtracking.

The guard buffers decoded tokens and runs a reactive checker on the
accumulated output at every completed segment (sentence by default). In
backtrack mode a violating segment is discarded and decoding resumes from
the previous checkpoint; in fail mode the violation is surfaced so the
engine's retry loop can take over.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

from sicql.checkers import CheckOutcome

#: A segment ends at ., ! or ? followed by whitespace (or end of stream).
DEFAULT_BOUNDARY = r"[.!?]\s+"

BACKTRACK = "backtrack"
FAIL = "fail"


def segment_spans(text: str, boundary_pattern: str = DEFAULT_BOUNDARY) -> list[int]:
    """End offsets of completed segments (terminator included)."""
    return [m.end() for m in re.finditer(boundary_pattern, text)]


@dataclass
class GuardEvent:
    kind: str  # "backtrack" | "violation"
    outcome: CheckOutcome
    discarded: str = ""


@dataclass
class StreamGuard:
    """Feed tokens, get segment-boundary checks; ``finish`` runs a last one."""

    checker: Callable[[str], CheckOutcome]
    on_violation: str = BACKTRACK
    boundary_pattern: str = DEFAULT_BOUNDARY
    text: str = ""
    committed: int = 0  # end offset of the last checkpoint that passed
    backtracks: int = 0
    outcomes: list[CheckOutcome] = field(default_factory=list)

    def __post_init__(self):
        if self.on_violation not in (BACKTRACK, FAIL):
            raise ValueError(f"unknown violation policy {self.on_violation!r}")

    def feed(self, token: str) -> GuardEvent | None:
        """Append a token; returns an event when a segment check fires."""
        self.text += token
        for end in segment_spans(self.text, self.boundary_pattern):
            if end <= self.committed:
                continue
            outcome = self.checker(self.text[:end])
            self.outcomes.append(outcome)
            if outcome.ok:
                self.committed = end
                continue
            if self.on_violation == BACKTRACK:
                discarded = self.text[self.committed:]
                self.text = self.text[: self.committed]
                self.backtracks += 1
                return GuardEvent(kind=BACKTRACK, outcome=outcome, discarded=discarded)
            return GuardEvent(kind="violation", outcome=outcome)
        return None

    def finish(self) -> CheckOutcome:
        """Final check over the full retained output."""
        if not self.text:
            return CheckOutcome("pass", 1.0, "", "stream-guard")
        outcome = self.checker(self.text)
        self.outcomes.append(outcome)
        if not outcome.ok and self.on_violation == BACKTRACK and self.committed < len(self.text):
            self.text = self.text[: self.committed]
            self.backtracks += 1
            if not self.text:
                return CheckOutcome("pass", 1.0, "", "stream-guard")
            recheck = self.checker(self.text)
            self.outcomes.append(recheck)
            return recheck
        return outcome

    @property
    def output(self) -> str:
        return self.text
