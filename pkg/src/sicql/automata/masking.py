"""Token masking over character automata.

A token is allowed from a state iff its whole character expansion can be
walked without leaving the automaton; decoding that only ever emits allowed
tokens therefore stays inside the automaton's language by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field


def automaton_step(automaton, state, symbol: str):
    """One-character transition; None signals rejection (missing or dead)."""
    return automaton.step(state, symbol)


def walk(automaton, state, text: str):
    """Walk a multi-character string; None as soon as any step rejects."""
    for ch in text:
        state = automaton.step(state, ch)
        if state is None:
            return None
    return state


def allowed_tokens(automaton, state, vocabulary: dict[str, str]) -> set[str]:
    """Subset of the vocabulary whose expansions survive from ``state``.

    The result may be empty; the decoder must then stop (if the emitted
    prefix is acceptable) or backtrack.
    """
    allowed = set()
    for token, expansion in vocabulary.items():
        if not expansion:
            raise ValueError(f"token {token!r} has an empty expansion")
        if walk(automaton, state, expansion) is not None:
            allowed.add(token)
    return allowed


@dataclass
class MaskState:
    """Decode-time cursor: current state, emitted prefix, checkpoints."""

    automaton: object
    state: object = None
    emitted: str = ""
    checkpoints: list[tuple[object, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.state is None:
            self.state = self.automaton.start

    def allowed(self, vocabulary: dict[str, str]) -> set[str]:
        return allowed_tokens(self.automaton, self.state, vocabulary)

    def admits(self, expansion: str) -> bool:
        return walk(self.automaton, self.state, expansion) is not None

    def advance(self, expansion: str) -> None:
        nxt = walk(self.automaton, self.state, expansion)
        if nxt is None:
            raise ValueError(f"expansion {expansion!r} leaves the automaton")
        self.state = nxt
        self.emitted += expansion

    def prefix_acceptable(self) -> bool:
        return self.automaton.is_accepting(self.state)

    def push_checkpoint(self) -> None:
        self.checkpoints.append((self.state, len(self.emitted)))

    def backtrack(self) -> bool:
        """Restore the most recent checkpoint; False when none remain."""
        if not self.checkpoints:
            return False
        self.state, length = self.checkpoints.pop()
        self.emitted = self.emitted[:length]
        return True
