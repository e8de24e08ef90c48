"""Deterministic plan rendering.

The logical rendering is valid query text: ``parse(format(parse(q)))`` is
structurally equal to ``parse(q)``. The physical rendering appends
per-constraint implementation annotations and is for humans (EXPLAIN).
"""

from __future__ import annotations

from sicql.lang.ast import (
    Aggregate,
    AssertStage,
    AttrRef,
    Binary,
    Cast,
    ConstraintClass,
    ConstraintDecl,
    Expr,
    Extend,
    FuncCall,
    InList,
    Literal,
    LiteralMatcher,
    LogicalPlan,
    Matcher,
    MaxLengthSpec,
    OpAnnotation,
    PromptMatcher,
    PromptTemplate,
    RangeSpec,
    RegexMatcher,
    RegexSpec,
    Scan,
    SetMatcher,
    SetStage,
    Stage,
    TypeSpec,
    Unary,
    ValueSetSpec,
    Where,
)

_PREC_OR = 1
_PREC_AND = 2
_PREC_NOT = 3
_PREC_CMP = 4
_PREC_ADD = 5
_PREC_MUL = 6
_PREC_NEG = 7
_PREC_CAST = 8
_PREC_ATOM = 9

_BINARY_PREC = {
    "OR": _PREC_OR,
    "AND": _PREC_AND,
    "=": _PREC_CMP, "<>": _PREC_CMP, "<": _PREC_CMP, "<=": _PREC_CMP,
    ">": _PREC_CMP, ">=": _PREC_CMP,
    "+": _PREC_ADD, "-": _PREC_ADD, "||": _PREC_ADD,
    "*": _PREC_MUL, "/": _PREC_MUL, "%": _PREC_MUL,
}


def _quote(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def render_literal(lit: Literal) -> str:
    if lit.vtype is None:
        return "NULL"
    v = lit.value
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, (int, float)):
        return repr(v)
    if lit.raw:
        return "r'" + str(v) + "'"
    return _quote(str(v))


def render_expr(expr: Expr) -> str:
    return _render(expr, 0)


def _render(expr: Expr, parent_prec: int) -> str:
    if isinstance(expr, Literal):
        return render_literal(expr)
    if isinstance(expr, AttrRef):
        return expr.name
    if isinstance(expr, Unary):
        if expr.op == "NOT":
            text = "NOT " + _render(expr.operand, _PREC_NOT)
            return _wrap(text, _PREC_NOT, parent_prec)
        return _wrap("-" + _render(expr.operand, _PREC_NEG), _PREC_NEG, parent_prec)
    if isinstance(expr, Binary):
        prec = _BINARY_PREC[expr.op]
        left = _render(expr.left, prec)
        # Left-associative: right child at same precedence needs parens.
        right = _render(expr.right, prec + 1)
        return _wrap(f"{left} {expr.op} {right}", prec, parent_prec)
    if isinstance(expr, FuncCall):
        if expr.name == "CURRENT_DATE":
            return "CURRENT_DATE"
        args = ", ".join(_render(a, 0) for a in expr.args)
        return f"{expr.name}({args})"
    if isinstance(expr, Cast):
        return _wrap(_render(expr.operand, _PREC_CAST) + "::" + expr.to_type.value, _PREC_CAST, parent_prec)
    if isinstance(expr, InList):
        items = ", ".join(render_literal(i) for i in expr.items)
        return _wrap(f"{_render(expr.operand, _PREC_ADD)} IN ({items})", _PREC_CMP, parent_prec)
    raise TypeError(f"unhandled expression node {type(expr).__name__}")


def _wrap(text: str, prec: int, parent_prec: int) -> str:
    return f"({text})" if prec < parent_prec else text


def render_prompt(template: PromptTemplate) -> str:
    parts = ["p'"]
    for seg in template.segments:
        if isinstance(seg, str):
            parts.append(seg.replace("'", "''"))
        else:
            parts.append("{%s}" % seg.name)
    parts.append("'")
    return "".join(parts)


def render_matcher(matcher: Matcher) -> str:
    if isinstance(matcher, LiteralMatcher):
        return _quote(matcher.text)
    if isinstance(matcher, RegexMatcher):
        return "r'" + matcher.pattern + "'"
    if isinstance(matcher, SetMatcher):
        return "(" + ", ".join(_quote(v) for v in matcher.values) + ")"
    if isinstance(matcher, PromptMatcher):
        return render_prompt(matcher.template)
    raise TypeError(f"unhandled matcher {type(matcher).__name__}")


def render_pred(decl: ConstraintDecl) -> str:
    c = decl.cclass
    if c in (ConstraintClass.DOMAIN, ConstraintClass.ASSERTION):
        if decl.expr is None:
            raise ValueError("implicit constraints are not rendered as ASSERT stages")
        return render_expr(decl.expr)
    if c == ConstraintClass.INCLUDE:
        return f"{decl.target} INCLUDES {render_matcher(decl.matcher)}"
    if c == ConstraintClass.EXCLUDE:
        return f"{decl.target} EXCLUDES {render_matcher(decl.matcher)}"
    if c == ConstraintClass.GROUNDED:
        return f"{decl.target} GROUNDED"
    if c == ConstraintClass.SOUND:
        return f"{decl.target} SOUND"
    return f"{decl.target} RELEVANT"


def render_constraint(decl: ConstraintDecl) -> str:
    """The canonical one-line constraint text (stored, recommended, EXPLAINed)."""
    return f"{render_pred(decl)} RETRY {decl.retry_threshold} {decl.failure_mode.value} ON FAIL"


def _render_source(source) -> str:
    return render_prompt(source) if isinstance(source, PromptTemplate) else render_expr(source)


def render_stage(stage: Stage) -> str:
    if isinstance(stage, Scan):
        return f"FROM {stage.table}"
    if isinstance(stage, SetStage):
        ann = f"{stage.annotation.value} " if stage.annotation != OpAnnotation.NONE else ""
        return f"|> SET {stage.attr} = {ann}{_render_source(stage.source)}"
    if isinstance(stage, Extend):
        ann = f"{stage.annotation.value} " if stage.annotation != OpAnnotation.NONE else ""
        typ = f" {stage.out_type.value}" if stage.out_type is not None else ""
        return f"|> EXTEND {ann}{_render_source(stage.source)} AS {stage.out_attr}{typ}"
    if isinstance(stage, Where):
        alias = "" if stage.alias_is_auto else f" AS {stage.where_alias}"
        return f"|> WHERE {_render_source(stage.predicate)}{alias}"
    if isinstance(stage, Aggregate):
        ann = f"{stage.annotation.value} " if stage.annotation != OpAnnotation.ABSTRACTIVE else ""
        typ = f" {stage.out_type.value}" if stage.out_type is not None else ""
        group = f" GROUP BY {', '.join(stage.group_by)}" if stage.group_by else ""
        return f"|> AGGREGATE {ann}{render_prompt(stage.prompt)} AS {stage.out_attr}{typ}{group}"
    if isinstance(stage, AssertStage):
        return f"|> ASSERT {render_constraint(stage.decl)}"
    raise TypeError(f"unhandled stage {type(stage).__name__}")


def format_plan(plan, level: str = "logical") -> str:
    """Render a plan one node per line.

    ``level="logical"`` takes a LogicalPlan (or anything holding one at
    ``.logical``) and produces reparseable query text. ``level="physical"``
    takes a planned physical plan and appends implementation annotations.
    """
    if level == "logical":
        logical: LogicalPlan = getattr(plan, "logical", plan)
        return "\n".join(render_stage(st) for st in logical.stages)
    if level != "physical":
        raise ValueError(f"unknown format level {level!r}")

    logical = getattr(plan, "logical", None)
    if logical is None:
        raise ValueError("physical formatting requires a planned physical plan")
    choices = plan.choices
    lines = []
    for st in logical.stages:
        # Injected prompt sections contain newlines; keep one node per line.
        line = render_stage(st).replace("\n", "\\n")
        implicit = getattr(st, "implicit_constraint", None)
        if implicit is not None:
            vtype = implicit.domain.vtype.value if isinstance(implicit.domain, TypeSpec) else "?"
            line += f"  [implicit {vtype} check: deterministic reactive]"
        if isinstance(st, AssertStage):
            impl = choices.get(st.decl.constraint_id)
            if impl is not None:
                line += f"  {impl.explain_tags()}"
        lines.append(line)
    for warning in getattr(plan, "warnings", ()):
        lines.append(f"-- warning: {warning}")
    estimate = getattr(plan, "estimate", None)
    if estimate is not None:
        lines.append(
            f"-- estimated plan cost: {estimate.expected_cost:.4f} units"
            f" (search: {plan.search_strategy})"
        )
    return "\n".join(lines)


def describe_constraint(decl: ConstraintDecl, annotation: OpAnnotation | None = None) -> str:
    """Canonical natural-language rendering, shared by prompt injection,
    retry feedback and the labeling interface."""
    c = decl.cclass
    if c == ConstraintClass.DOMAIN:
        d = decl.domain
        if isinstance(d, RegexSpec):
            return f"output must match regex {d.pattern}"
        if isinstance(d, TypeSpec):
            return f"output must be a valid {d.vtype.value}"
        if isinstance(d, MaxLengthSpec):
            return f"output must be shorter than {d.limit} characters"
        if isinstance(d, RangeSpec):
            return f"output must be between {d.lo} and {d.hi}"
        if isinstance(d, ValueSetSpec):
            listed = ", ".join(str(v) for v in d.values)
            return f"output must be one of: {listed}"
        return f"output must satisfy: {render_expr(decl.expr)}"
    if c == ConstraintClass.INCLUDE:
        return f"output must include {_matcher_phrase(decl.matcher)}"
    if c == ConstraintClass.EXCLUDE:
        return f"output must not include {_matcher_phrase(decl.matcher)}"
    if c == ConstraintClass.GROUNDED:
        if annotation == OpAnnotation.EXTRACTIVE:
            return "output must be a verbatim span of the operator input"
        if annotation == OpAnnotation.ABSTRACTIVE:
            return "output must be factually consistent with the operator input"
        return "output must be grounded in the operator input"
    if c == ConstraintClass.SOUND:
        return "reasoning must be logically sound: premises grounded in the input and steps valid"
    if c == ConstraintClass.RELEVANT:
        return "output must be relevant to the operator task"
    return f"output must satisfy: {render_expr(decl.expr)}"


def _matcher_phrase(matcher: Matcher) -> str:
    if isinstance(matcher, LiteralMatcher):
        return f"'{matcher.text}'"
    if isinstance(matcher, RegexMatcher):
        return f"a match for regex {matcher.pattern}"
    if isinstance(matcher, SetMatcher):
        return "any of: " + ", ".join(f"'{v}'" for v in matcher.values)
    if isinstance(matcher, PromptMatcher):
        return f"content matching: {matcher.template.raw_text}"
    raise TypeError(f"unhandled matcher {type(matcher).__name__}")
