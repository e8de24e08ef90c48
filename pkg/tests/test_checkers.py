"""Checkers for all six constraint classes against scripted judges."""

import random

import pytest

from sicql.checkers import (
    check_domain,
    check_grounding_abstractive,
    check_grounding_extractive,
    check_ie,
    check_relevance,
    check_soundness,
    eval_assertion,
)
from sicql.errors import CheckError, ModelError
from sicql.lang.ast import (
    LiteralMatcher,
    MaxLengthSpec,
    PromptMatcher,
    RangeSpec,
    RegexSpec,
    SetMatcher,
    TypeSpec,
    ValueType,
)
from sicql.lang.parser import Parser, parse_prompt_string
from sicql.models import CoT, FakeModel, FakeModelScript

DOB_REGEX = r"^\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])$"


def make_judge(rules, default=True):
    return FakeModel(
        FakeModelScript.from_dict({"judge": {"default_verdict": default, "rules": rules}}),
        seed=1,
    )


class FailingJudge:
    def judge(self, *args, **kwargs):
        raise ModelError("transport down")


class TestDomain:
    def test_dob_regex(self):
        spec = RegexSpec(DOB_REGEX)
        assert check_domain("1985-03-12", spec).ok
        assert not check_domain("3/12/1985", spec).ok

    def test_regex_agrees_with_engine_on_random_strings(self):
        rng = random.Random(8)
        import re

        from sicql.automata.regex_dfa import strict_end_pattern

        spec = RegexSpec(DOB_REGEX)
        ref = re.compile(strict_end_pattern(DOB_REGEX))
        for _ in range(300):
            s = "".join(rng.choice("0123456789-/ab") for _ in range(rng.randint(0, 12)))
            assert check_domain(s, spec).ok == bool(ref.search(s))

    def test_max_length_boundary(self):
        spec = MaxLengthSpec(limit=1000)
        assert check_domain("x" * 999, spec).ok
        assert not check_domain("x" * 1000, spec).ok

    def test_range_and_set_and_type(self):
        assert check_domain(5, RangeSpec(1, 10)).ok
        assert not check_domain(11, RangeSpec(1, 10)).ok
        assert check_domain("mg", ValueSetSpecFactory("mg", "ml")).ok
        assert not check_domain("kg", ValueSetSpecFactory("mg", "ml")).ok
        assert check_domain(3, TypeSpec(ValueType.INT)).ok
        assert not check_domain("3", TypeSpec(ValueType.INT)).ok

    def test_null_handling(self):
        assert not check_domain(None, RegexSpec("x")).ok
        assert not check_domain(None, TypeSpec(ValueType.STRING)).ok
        assert check_domain(None, TypeSpec(ValueType.STRING, allow_null=True)).ok

    def test_violation_feedback_names_the_spec(self):
        out = check_domain("nope", RegexSpec(DOB_REGEX))
        assert DOB_REGEX in out.feedback


def ValueSetSpecFactory(*values):
    from sicql.lang.ast import ValueSetSpec

    return ValueSetSpec(values=values)


class TestInclusionExclusion:
    def test_literal_exclude(self):
        assert check_ie("abc", LiteralMatcher("x"), "exclude").ok
        assert not check_ie("axc", LiteralMatcher("x"), "exclude").ok

    def test_literal_include(self):
        assert check_ie("has alpha inside", LiteralMatcher("alpha"), "include").ok
        assert not check_ie("nothing here", LiteralMatcher("alpha"), "include").ok

    def test_set_include(self):
        matcher = SetMatcher(values=("Dr. Kim", "Dr. Lee"))
        assert check_ie("seen by Dr. Lee today", matcher, "include").ok
        assert not check_ie("seen by Dr. Wu today", matcher, "include").ok

    def test_regex_matcher(self):
        from sicql.lang.ast import RegexMatcher

        assert not check_ie("ssn 123-45-6789", RegexMatcher(r"\d{3}-\d{2}-\d{4}"), "exclude").ok

    def test_prompt_exclude_via_judge(self):
        matcher = PromptMatcher(parse_prompt_string("p'test results'"))
        judge = make_judge(
            [
                {"mode": "semantic-match", "pattern": "lab panel", "applies_to": "output", "verdict": True},
                {"mode": "semantic-match", "verdict": False},
            ]
        )
        assert check_ie("no labs here", matcher, "exclude", judge=judge).ok
        assert not check_ie("lab panel attached", matcher, "exclude", judge=judge).ok

    def test_prompt_matcher_requires_judge(self):
        matcher = PromptMatcher(parse_prompt_string("p'x'"))
        with pytest.raises(CheckError):
            check_ie("text", matcher, "exclude", judge=None)

    def test_prompt_matcher_returns_judge_confidence(self):
        matcher = PromptMatcher(parse_prompt_string("p'x'"))
        judge = make_judge([{"mode": "semantic-match", "verdict": False, "confidence": 0.62}])
        assert check_ie("text", matcher, "exclude", judge=judge).confidence == 0.62


class TestGrounding:
    def test_extractive_identity_and_empty(self):
        assert check_grounding_extractive("same text", "same text").ok
        assert check_grounding_extractive("", "anything").ok

    def test_extractive_rejects_non_substring(self):
        assert not check_grounding_extractive("xy", "xzy").ok

    def test_extractive_agrees_with_bruteforce(self):
        rng = random.Random(12)
        for _ in range(2000):
            source = "".join(rng.choice("abc") for _ in range(rng.randint(0, 30)))
            probe = "".join(rng.choice("abc") for _ in range(rng.randint(0, 6)))
            brute = any(
                source[i: i + len(probe)] == probe for i in range(len(source) - len(probe) + 1)
            ) or probe == ""
            assert check_grounding_extractive(probe, source).ok == brute

    def test_whitespace_normalization_flag(self):
        assert not check_grounding_extractive("a  b", "a b").ok
        assert check_grounding_extractive("a  b", "a b", normalize_whitespace=True).ok

    def test_abstractive_scripted(self):
        judge = make_judge(
            [{"mode": "fact-check", "pattern": "UNSUPPORTED", "applies_to": "output", "verdict": False}]
        )
        assert check_grounding_abstractive("fine summary", "source", judge).ok
        out = check_grounding_abstractive("has UNSUPPORTED claim", "source", judge)
        assert not out.ok and out.feedback

    def test_judge_failure_is_error_not_violation(self):
        with pytest.raises(CheckError):
            check_grounding_abstractive("out", "src", FailingJudge())


class TestSoundness:
    def test_supported_chain_passes(self):
        judge = make_judge([])
        cot = CoT(premises=("the exam notes fever",), steps=("fever suggests infection",))
        assert check_soundness("exam notes fever and chills", cot, True, judge).ok

    def test_ungrounded_premise_named(self):
        judge = make_judge(
            [{"mode": "fact-check", "pattern": "martian", "applies_to": "output", "verdict": False}]
        )
        cot = CoT(premises=("patient is a martian",), steps=("so sepsis",))
        out = check_soundness("exam notes fever", cot, True, judge)
        assert not out.ok
        assert "premise 1" in out.feedback

    def test_empty_premises_violation(self):
        out = check_soundness("input", CoT(premises=(), steps=("step",)), True, make_judge([]))
        assert not out.ok

    def test_invalid_steps(self):
        judge = make_judge([{"mode": "soundness-steps", "verdict": False}])
        cot = CoT(premises=("fever",), steps=("irrelevant leap",))
        assert not check_soundness("fever noted", cot, True, judge).ok


class TestRelevance:
    def test_relevant_output(self):
        judge = make_judge(
            [{"mode": "relevance", "pattern": "social history", "applies_to": "output", "verdict": False}]
        )
        assert check_relevance("extract medical history", "ehr", "medical history: htn", judge).ok
        assert not check_relevance("extract medical history", "ehr", "social history: smoker", judge).ok

    def test_empty_output_violates_without_judge_call(self):
        out = check_relevance("task", "input", "   ", FailingJudge())
        assert not out.ok


class TestAssertions:
    def eval(self, text, values):
        parser = Parser(f"FROM t |> WHERE {text}")
        parser.parse()
        return eval_assertion(parser.stages[1].predicate, values)

    def test_length_predicate(self):
        assert self.eval("LENGTH(x) < 5", {"x": "abc"}).ok

    def test_comparison_violation(self):
        assert not self.eval("a > b", {"a": 1, "b": 2}).ok

    def test_regex_url(self):
        assert not self.eval("REGEXP_CONTAINS(u, r'^https://')", {"u": "http://x"}).ok

    def test_null_predicate_feedback(self):
        out = self.eval("LENGTH(x) < 5", {"x": None})
        assert not out.ok
        assert out.feedback == "predicate evaluated to NULL"


class TestDeterminism:
    def test_repeated_calls_identical(self):
        spec = RegexSpec(DOB_REGEX)
        outcomes = {check_domain("1985-03-12", spec) for _ in range(5)}
        assert len(outcomes) == 1

    def test_deterministic_confidence_is_one(self):
        for outcome in (
            check_domain("x", MaxLengthSpec(5)),
            check_ie("a", LiteralMatcher("b"), "include"),
            check_grounding_extractive("a", "ab"),
        ):
            assert outcome.confidence == 1.0

    def test_violations_always_carry_feedback(self):
        judge = make_judge([{"mode": "relevance", "verdict": False}])
        outcomes = [
            check_domain("no", RegexSpec("^yes$")),
            check_ie("bad x", LiteralMatcher("x"), "exclude"),
            check_grounding_extractive("zz", "ab"),
            check_relevance("t", "i", "out", judge),
        ]
        for outcome in outcomes:
            assert not outcome.ok and outcome.feedback
