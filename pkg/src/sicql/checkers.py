"""Violation detection for the six constraint classes.

Deterministic checks are pure functions with confidence 1.0; judge-backed
checks delegate to a model client's ``judge`` method and report its
confidence. Judge transport failures raise ``CheckError`` and never surface
as violations. Every violation carries feedback text for the retry loop.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass

from sicql.errors import CheckError, ModelError
from sicql.exprs import eval_expr, parse_date
from sicql.lang.ast import (
    DomainSpec,
    Expr,
    LiteralMatcher,
    Matcher,
    MaxLengthSpec,
    PromptMatcher,
    RangeSpec,
    RegexMatcher,
    RegexSpec,
    SetMatcher,
    TypeSpec,
    ValueSetSpec,
    ValueType,
)

PASS = "pass"
VIOLATION = "violation"


@dataclass(frozen=True)
class CheckOutcome:
    verdict: str  # pass | violation
    confidence: float
    feedback: str
    mechanism: str

    @property
    def ok(self) -> bool:
        return self.verdict == PASS


def _passed(mechanism: str, confidence: float = 1.0) -> CheckOutcome:
    return CheckOutcome(PASS, confidence, "", mechanism)


def _violated(mechanism: str, feedback: str, confidence: float = 1.0) -> CheckOutcome:
    return CheckOutcome(VIOLATION, confidence, feedback, mechanism)


# ---------------------------------------------------------------------------
# Domain constraints
# ---------------------------------------------------------------------------

_TYPE_PATTERNS = {
    ValueType.INT: r"^-?\d+$",
    ValueType.FLOAT: r"^-?\d+(\.\d+)?$",
    ValueType.BOOL: r"^(true|false)$",
    ValueType.DATE: r"^\d{4}-\d{2}-\d{2}$",
}


def domain_regex(spec: DomainSpec) -> str | None:
    """Automaton encoding of a domain spec, when one exists.

    Ranges have no character-level encoding and return None; STRING type
    specs accept everything and need no mask.
    """
    if isinstance(spec, RegexSpec):
        return spec.pattern
    if isinstance(spec, TypeSpec):
        return _TYPE_PATTERNS.get(spec.vtype)
    if isinstance(spec, MaxLengthSpec):
        return r"^[\s\S]{0,%d}$" % max(spec.limit - 1, 0)
    if isinstance(spec, ValueSetSpec):
        alts = "|".join(re.escape(str(v)) for v in spec.values)
        return f"^({alts})$"
    return None


def check_domain(value, spec: DomainSpec) -> CheckOutcome:
    mech = "domain"
    if value is None:
        if isinstance(spec, TypeSpec) and spec.allow_null:
            return _passed(mech)
        return _violated(mech, "value is NULL")
    if isinstance(spec, TypeSpec):
        if _type_ok(value, spec.vtype):
            return _passed(mech)
        return _violated(mech, f"value {value!r} is not a valid {spec.vtype.value}")
    if isinstance(spec, RegexSpec):
        if _search_strict(spec.pattern, str(value)):
            return _passed(mech)
        return _violated(mech, f"value {value!r} does not match regex {spec.pattern}")
    if isinstance(spec, RangeSpec):
        try:
            num = float(value)
        except (TypeError, ValueError):
            return _violated(mech, f"value {value!r} is not numeric for range check")
        if spec.lo <= num <= spec.hi:
            return _passed(mech)
        return _violated(mech, f"value {value!r} is outside range [{spec.lo}, {spec.hi}]")
    if isinstance(spec, MaxLengthSpec):
        if len(str(value)) < spec.limit:
            return _passed(mech)
        return _violated(
            mech, f"value has {len(str(value))} characters, must be shorter than {spec.limit}"
        )
    if isinstance(spec, ValueSetSpec):
        if value in spec.values or str(value) in {str(v) for v in spec.values}:
            return _passed(mech)
        listed = ", ".join(str(v) for v in spec.values)
        return _violated(mech, f"value {value!r} is not one of: {listed}")
    raise CheckError(f"unhandled domain spec {type(spec).__name__}")


def _type_ok(value, vtype: ValueType) -> bool:
    if vtype == ValueType.STRING:
        return isinstance(value, str)
    if vtype == ValueType.INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if vtype == ValueType.FLOAT:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if vtype == ValueType.BOOL:
        return isinstance(value, bool)
    if vtype == ValueType.DATE:
        if isinstance(value, dt.date):
            return True
        return isinstance(value, str) and parse_date(value) is not None
    return False


# ---------------------------------------------------------------------------
# Inclusion / exclusion constraints
# ---------------------------------------------------------------------------

def check_ie(value, matcher: Matcher, mode: str, judge=None, task: str = "") -> CheckOutcome:
    """``mode`` is "include" or "exclude"."""
    if mode not in ("include", "exclude"):
        raise CheckError(f"unknown IE mode {mode!r}")
    if value is None:
        return _violated("matcher", "value is NULL")
    text = str(value)

    if isinstance(matcher, PromptMatcher):
        if judge is None:
            raise CheckError("prompt matcher requires a judge client")
        result = _call_judge(
            judge,
            task=f"does the output contain or match: {matcher.template.raw_text}",
            input_text="",
            output=text,
            mode="semantic-match",
        )
        present = result.verdict
        mech = "judge:semantic-match"
        if mode == "include":
            if present:
                return _passed(mech, result.confidence)
            return _violated(
                mech, f"output does not include: {matcher.template.raw_text}", result.confidence
            )
        if present:
            return _violated(
                mech, f"output includes forbidden content: {matcher.template.raw_text}",
                result.confidence,
            )
        return _passed(mech, result.confidence)

    present, what = _deterministic_match(text, matcher)
    mech = "matcher"
    if mode == "include":
        if present:
            return _passed(mech)
        return _violated(mech, f"output does not include {what}")
    if present:
        return _violated(mech, f"output includes forbidden {what}")
    return _passed(mech)


def _search_strict(pattern: str, text: str) -> bool:
    """Regex search with strict end-of-string anchors (dialect semantics)."""
    from sicql.automata.regex_dfa import strict_end_pattern

    return re.search(strict_end_pattern(pattern), text) is not None


def _deterministic_match(text: str, matcher: Matcher) -> tuple[bool, str]:
    if isinstance(matcher, LiteralMatcher):
        return matcher.text in text, f"'{matcher.text}'"
    if isinstance(matcher, RegexMatcher):
        return _search_strict(matcher.pattern, text), f"regex {matcher.pattern}"
    if isinstance(matcher, SetMatcher):
        listed = ", ".join(f"'{v}'" for v in matcher.values)
        return any(v in text for v in matcher.values), f"any of: {listed}"
    raise CheckError(f"unhandled matcher {type(matcher).__name__}")


# ---------------------------------------------------------------------------
# Grounding constraints
# ---------------------------------------------------------------------------

def check_grounding_extractive(output, source, normalize_whitespace: bool = False) -> CheckOutcome:
    """Pass iff the output is a contiguous substring of the source."""
    mech = "substring"
    if output is None or source is None:
        return _violated(mech, "output or source is NULL")
    out_text, src_text = str(output), str(source)
    if normalize_whitespace:
        out_text = " ".join(out_text.split())
        src_text = " ".join(src_text.split())
    if out_text in src_text:
        return _passed(mech)
    return _violated(mech, "output is not a verbatim span of the operator input")


def check_grounding_abstractive(output, source, judge) -> CheckOutcome:
    mech = "judge:fact-check"
    if output is None:
        return _violated(mech, "output is NULL")
    result = _call_judge(
        judge,
        task="is the output factually consistent with the input",
        input_text=str(source or ""),
        output=str(output),
        mode="fact-check",
    )
    if result.verdict:
        return _passed(mech, result.confidence)
    return _violated(
        mech,
        f"output is not factually consistent with the input: {result.rationale or 'judge flagged it'}",
        result.confidence,
    )


# ---------------------------------------------------------------------------
# Soundness and relevance
# ---------------------------------------------------------------------------

def check_soundness(operator_input: str, cot, result, judge) -> CheckOutcome:
    """Premises must be grounded in the operator input and steps valid."""
    mech = "judge:soundness"
    premises = list(getattr(cot, "premises", ()) or ())
    steps = list(getattr(cot, "steps", ()) or ())
    if not premises:
        return _violated(mech, "reasoning lists no premises, so the result has no grounded basis")
    confidence = 1.0
    for i, premise in enumerate(premises, start=1):
        res = _call_judge(
            judge,
            task="is this premise supported by the input",
            input_text=operator_input,
            output=premise,
            mode="fact-check",
        )
        confidence = min(confidence, res.confidence)
        if not res.verdict:
            return _violated(
                mech, f"premise {i} is not grounded in the operator input: {premise!r}",
                res.confidence,
            )
    steps_text = "\n".join(steps)
    res = _call_judge(
        judge,
        task="do these reasoning steps validly lead to the conclusion",
        input_text="premises:\n" + "\n".join(premises) + "\nsteps:\n" + steps_text,
        output=str(result),
        mode="soundness-steps",
    )
    confidence = min(confidence, res.confidence)
    if not res.verdict:
        return _violated(mech, f"reasoning steps are not valid: {res.rationale or 'judge flagged them'}",
                         res.confidence)
    return _passed(mech, confidence)


def check_relevance(task_prompt: str, input_text: str, output, judge) -> CheckOutcome:
    mech = "judge:relevance"
    if output is None or not str(output).strip():
        return _violated(mech, "empty output cannot be relevant to the task")
    result = _call_judge(
        judge,
        task=task_prompt,
        input_text=str(input_text or ""),
        output=str(output),
        mode="relevance",
    )
    if result.verdict:
        return _passed(mech, result.confidence)
    return _violated(
        mech,
        f"output is not relevant to the task: {result.rationale or 'judge flagged it'}",
        result.confidence,
    )


# ---------------------------------------------------------------------------
# Assertions
# ---------------------------------------------------------------------------

def eval_assertion(expr: Expr, values: dict[str, object], current_date=None) -> CheckOutcome:
    mech = "expression"
    try:
        result = eval_expr(expr, values, current_date)
    except ModelError:
        raise
    except Exception as exc:  # noqa: BLE001 - evaluation failure is a check error
        raise CheckError(f"assertion evaluation failed: {exc}") from exc
    if result is None:
        return _violated(mech, "predicate evaluated to NULL")
    if result is True:
        return _passed(mech)
    return _violated(mech, "predicate evaluated to false")


@dataclass(frozen=True)
class _JudgeView:
    verdict: bool
    confidence: float
    rationale: str


def _call_judge(judge, task: str, input_text: str, output: str, mode: str) -> _JudgeView:
    if judge is None:
        raise CheckError(f"{mode} check requires a judge client")
    try:
        res = judge.judge(task, input_text, output, mode)
    except ModelError as exc:
        raise CheckError(f"judge call failed: {exc}") from exc
    confidence = res.confidence if res.confidence is not None else 0.5
    return _JudgeView(bool(res.verdict), float(confidence), getattr(res, "rationale", ""))
