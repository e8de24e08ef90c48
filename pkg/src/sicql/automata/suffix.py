"""Suffix automaton: the minimal DFA of all substrings of a text.

Built online in O(n) with at most max(2, 2n-1) states; walking any substring
from the start state never leaves the automaton, which is what makes it a
token mask for "output must be a span of the source" constraints. Every
state is accepting since every reachable prefix is some substring.
"""

from __future__ import annotations


class SuffixAutomaton:
    __slots__ = ("transitions", "link", "length", "_last", "source_length")

    def __init__(self) -> None:
        self.transitions: list[dict[str, int]] = [{}]
        self.link: list[int] = [-1]
        self.length: list[int] = [0]
        self._last = 0
        self.source_length = 0

    @property
    def start(self) -> int:
        return 0

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    def _add_state(self, length: int, link: int, trans: dict[str, int]) -> int:
        self.transitions.append(trans)
        self.link.append(link)
        self.length.append(length)
        return len(self.transitions) - 1

    def extend(self, ch: str) -> None:
        self.source_length += 1
        cur = self._add_state(self.length[self._last] + 1, -1, {})
        p = self._last
        while p != -1 and ch not in self.transitions[p]:
            self.transitions[p][ch] = cur
            p = self.link[p]
        if p == -1:
            self.link[cur] = 0
        else:
            q = self.transitions[p][ch]
            if self.length[p] + 1 == self.length[q]:
                self.link[cur] = q
            else:
                clone = self._add_state(self.length[p] + 1, self.link[q], dict(self.transitions[q]))
                while p != -1 and self.transitions[p].get(ch) == q:
                    self.transitions[p][ch] = clone
                    p = self.link[p]
                self.link[q] = clone
                self.link[cur] = clone
        self._last = cur

    def step(self, state: int, symbol: str) -> int | None:
        """Follow one character; None when no transition exists."""
        return self.transitions[state].get(symbol)

    def is_accepting(self, state: int) -> bool:  # noqa: ARG002 - uniform automaton interface
        return True

    def accepts(self, text: str) -> bool:
        """True iff ``text`` is a substring of the source text."""
        state = 0
        for ch in text:
            nxt = self.step(state, ch)
            if nxt is None:
                return False
            state = nxt
        return True


def build_suffix_automaton(text: str) -> SuffixAutomaton:
    sa = SuffixAutomaton()
    for ch in text:
        sa.extend(ch)
    return sa
