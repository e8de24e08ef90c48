"""Automata machinery for proactive constraint enforcement."""

from sicql.automata.masking import MaskState, allowed_tokens, automaton_step
from sicql.automata.regex_dfa import RegexDfa, product_intersection_empty, regex_to_dfa
from sicql.automata.stream import StreamGuard, segment_spans
from sicql.automata.suffix import SuffixAutomaton, build_suffix_automaton

__all__ = [
    "MaskState",
    "RegexDfa",
    "StreamGuard",
    "SuffixAutomaton",
    "allowed_tokens",
    "automaton_step",
    "build_suffix_automaton",
    "product_intersection_empty",
    "regex_to_dfa",
    "segment_spans",
]
