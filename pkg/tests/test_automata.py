"""Suffix automaton, regex DFA, token masks, stream guard."""

import random
import re

import pytest

from sicql.automata import (
    MaskState,
    StreamGuard,
    allowed_tokens,
    build_suffix_automaton,
    product_intersection_empty,
    regex_to_dfa,
)
from sicql.automata.regex_dfa import strict_end_pattern
from sicql.checkers import CheckOutcome
from sicql.errors import RegexSupportError

from .regexgen import gen_pattern


class TestSuffixAutomaton:
    def test_empty_text_accepts_only_empty(self):
        sa = build_suffix_automaton("")
        assert sa.accepts("")
        assert not sa.accepts("a")

    def test_known_substrings(self):
        sa = build_suffix_automaton("abcbc")
        assert sa.accepts("cb")
        assert sa.accepts("bcbc")
        assert not sa.accepts("ca")

    def test_agreement_with_bruteforce_on_random_text(self):
        rng = random.Random(101)
        for _ in range(50):
            n = rng.randint(0, 200)
            text = "".join(rng.choice("abcd ") for _ in range(n))
            sa = build_suffix_automaton(text)
            # All substrings accepted.
            for _ in range(40):
                if not text:
                    break
                i = rng.randrange(len(text))
                j = rng.randint(i, len(text))
                assert sa.accepts(text[i:j])
            # Random probes agree with the in operator.
            for _ in range(50):
                probe = "".join(rng.choice("abcd ") for _ in range(rng.randint(0, 10)))
                assert sa.accepts(probe) == (probe in text)

    def test_state_bound(self):
        rng = random.Random(7)
        for n in [0, 1, 2, 3, 10, 100, 1000]:
            text = "".join(rng.choice("ab") for _ in range(n))
            sa = build_suffix_automaton(text)
            assert sa.n_states <= max(2, 2 * n - 1)

    def test_walking_substrings_never_rejects(self):
        rng = random.Random(3)
        text = "the quick brown fox jumps over the lazy dog"
        sa = build_suffix_automaton(text)
        for _ in range(200):
            i = rng.randrange(len(text))
            j = rng.randint(i, len(text))
            state = sa.start
            for ch in text[i:j]:
                state = sa.step(state, ch)
                assert state is not None


class TestRegexDfa:
    def test_a_plus_anchored(self):
        d = regex_to_dfa("^a+$")
        assert d.accepts("a") and d.accepts("aa")
        assert not d.accepts("") and not d.accepts("ab")

    def test_empty_anchor_accepts_only_empty(self):
        d = regex_to_dfa("^$")
        assert d.accepts("")
        assert not d.accepts("x")

    def test_search_semantics_when_unanchored(self):
        d = regex_to_dfa("b+")
        assert d.accepts("abba")
        assert not d.accepts("aca")

    def test_branch_anchoring_matches_python(self):
        d = regex_to_dfa("^a+$|^b+$")
        assert d.accepts("aa") and d.accepts("b")
        assert not d.accepts("ab")

    def test_unsupported_features_rejected(self):
        for pattern in [r"(a)\1", "a(?=b)", "(?:ab)", "a^b"]:
            with pytest.raises(RegexSupportError):
                regex_to_dfa(pattern)

    def test_differential_against_reference(self):
        rng = random.Random(1234)
        for _ in range(50):
            pattern = gen_pattern(rng)
            dfa = regex_to_dfa(pattern)
            ref = re.compile(strict_end_pattern(pattern))
            for _ in range(1000):
                s = "".join(rng.choice("abc01_\n") for _ in range(rng.randint(0, 12)))
                assert dfa.accepts(s) == (ref.search(s) is not None), (pattern, s)

    def test_minimization_reaches_fixed_point(self):
        from sicql.automata.regex_dfa import OTHER, _minimize

        rng = random.Random(77)
        for _ in range(30):
            pattern = gen_pattern(rng)
            dfa = regex_to_dfa(pattern)
            atoms = sorted(dfa.explicit) + [OTHER]
            table2, accepting2, _ = _minimize(
                dfa.transitions, dfa.accepting, atoms, dfa.start
            )
            assert len(table2) == dfa.n_states, pattern


class TestMasks:
    def test_allowed_tokens_on_suffix_automaton(self):
        sa = build_suffix_automaton("abc")
        vocab = {"a": "a", "b": "b", "ab": "ab", "zz": "zz"}
        assert allowed_tokens(sa, sa.start, vocab) == {"a", "b", "ab"}

    def test_empty_vocabulary(self):
        sa = build_suffix_automaton("abc")
        assert allowed_tokens(sa, sa.start, {}) == set()

    def test_dfa_walk(self):
        d = regex_to_dfa(r"^\d+$")
        assert allowed_tokens(d, d.start, {"1": "1", "x": "x"}) == {"1"}

    def test_mask_soundness_over_random_decodes(self):
        rng = random.Random(11)
        source = "substring masking keeps every emitted prefix inside the text"
        sa = build_suffix_automaton(source)
        vocab = {c: c for c in set(source) | set("xyz!")}
        for _ in range(200):
            mask = MaskState(sa)
            for _ in range(rng.randint(0, 30)):
                allowed = mask.allowed(vocab)
                if not allowed:
                    break
                mask.advance(rng.choice(sorted(allowed)))
            assert mask.emitted in source

    def test_checkpoint_backtrack(self):
        sa = build_suffix_automaton("abcdef")
        mask = MaskState(sa)
        mask.advance("abc")
        mask.push_checkpoint()
        mask.advance("de")
        assert mask.backtrack()
        assert mask.emitted == "abc"
        assert not mask.backtrack()


def make_checker(bad_marker: str):
    def checker(text: str) -> CheckOutcome:
        if bad_marker in text:
            return CheckOutcome("violation", 0.95, f"contains {bad_marker}", "test")
        return CheckOutcome("pass", 0.9, "", "test")

    return checker


class TestStreamGuard:
    def test_two_clean_sentences(self):
        guard = StreamGuard(checker=make_checker("BAD"))
        for token in ["All good here. ", "Still fine."]:
            assert guard.feed(token) is None
        assert guard.finish().ok
        assert guard.output == "All good here. Still fine."
        assert guard.backtracks == 0

    def test_backtrack_discards_offending_segment(self):
        guard = StreamGuard(checker=make_checker("BAD"))
        assert guard.feed("First sentence is fine. ") is None
        event = guard.feed("BAD claim here. ")
        assert event is not None and event.kind == "backtrack"
        assert guard.finish().ok
        assert guard.output == "First sentence is fine. "
        assert guard.backtracks == 1

    def test_fail_mode_surfaces_violation(self):
        guard = StreamGuard(checker=make_checker("BAD"), on_violation="fail")
        guard.feed("Fine start. ")
        outcome = guard.finish()
        assert outcome.ok
        guard2 = StreamGuard(checker=make_checker("BAD"), on_violation="fail")
        event = guard2.feed("BAD things. next")
        assert event is not None and event.kind == "violation"

    def test_violation_on_finish_with_fail_mode(self):
        guard = StreamGuard(checker=make_checker("BAD"), on_violation="fail")
        guard.feed("trailing BAD fragment without terminator")
        outcome = guard.finish()
        assert not outcome.ok

    def test_retained_prefix_always_passes(self):
        rng = random.Random(9)
        for _ in range(50):
            guard = StreamGuard(checker=make_checker("z"))
            for _ in range(rng.randint(1, 8)):
                word = "".join(rng.choice("abz") for _ in range(4))
                guard.feed(word + rng.choice([". ", " ", "! "]))
            guard.finish()
            assert "z" not in guard.output or guard.on_violation == "fail"


class TestProductEmptiness:
    def test_disjoint_anchored_languages(self):
        empty, witness = product_intersection_empty(regex_to_dfa("^a+$"), regex_to_dfa("^b+$"))
        assert empty and witness is None

    def test_overlapping_languages_give_witness(self):
        empty, witness = product_intersection_empty(
            regex_to_dfa("^(ab)+$"), regex_to_dfa("^a.*b$")
        )
        assert not empty
        assert re.search(strict_end_pattern("^(ab)+$"), witness)
        assert re.search(strict_end_pattern("^a.*b$"), witness)

    def test_unanchored_patterns_always_intersect(self):
        empty, witness = product_intersection_empty(regex_to_dfa("aa"), regex_to_dfa("bb"))
        assert not empty
        assert "aa" in witness and "bb" in witness

    def test_agreement_with_bounded_enumeration(self):
        """Shortest-witness BFS vs exhaustive strings up to length 8."""
        rng = random.Random(4242)
        alphabet = "ab-"  # two pattern letters plus one outside char
        checked = 0
        while checked < 100:
            p1 = gen_pattern(rng, alphabet="ab", escapes=False)
            p2 = gen_pattern(rng, alphabet="ab", escapes=False)
            d1, d2 = regex_to_dfa(p1), regex_to_dfa(p2)
            empty, witness = product_intersection_empty(d1, d2)
            r1 = re.compile(strict_end_pattern(p1))
            r2 = re.compile(strict_end_pattern(p2))
            if not empty:
                # The witness must really be in both languages.
                assert r1.search(witness) and r2.search(witness), (p1, p2, witness)
                if len(witness) > 8:
                    continue  # outside the enumerable bound; not comparable
            found = _enumerate_common(r1, r2, alphabet, 8)
            assert (found is None) == empty, (p1, p2, witness, found)
            checked += 1


def _enumerate_common(r1, r2, alphabet: str, max_len: int):
    from itertools import product

    for length in range(max_len + 1):
        for chars in product(alphabet, repeat=length):
            s = "".join(chars)
            if r1.search(s) and r2.search(s):
                return s
    return None
