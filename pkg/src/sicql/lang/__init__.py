"""Pipe-SQL dialect with semantic operators and integrity constraints."""

from sicql.lang.ast import (
    Aggregate,
    AssertStage,
    AttrRef,
    Binary,
    Cast,
    ConstraintClass,
    ConstraintDecl,
    Extend,
    Expr,
    FailureMode,
    FuncCall,
    InList,
    Literal,
    LiteralMatcher,
    LogicalPlan,
    Matcher,
    MaxLengthSpec,
    OpAnnotation,
    Placeholder,
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
    ValueType,
    Where,
)
from sicql.lang.formatter import (
    describe_constraint,
    format_plan,
    render_constraint,
    render_expr,
)
from sicql.lang.parser import parse_constraint_pred, parse_prompt_string, parse_query

__all__ = [
    "Aggregate",
    "AssertStage",
    "AttrRef",
    "Binary",
    "Cast",
    "ConstraintClass",
    "ConstraintDecl",
    "Extend",
    "Expr",
    "FailureMode",
    "FuncCall",
    "InList",
    "Literal",
    "LiteralMatcher",
    "LogicalPlan",
    "Matcher",
    "MaxLengthSpec",
    "OpAnnotation",
    "Placeholder",
    "PromptMatcher",
    "PromptTemplate",
    "RangeSpec",
    "RegexMatcher",
    "RegexSpec",
    "Scan",
    "SetMatcher",
    "SetStage",
    "Stage",
    "TypeSpec",
    "Unary",
    "ValueSetSpec",
    "ValueType",
    "Where",
    "describe_constraint",
    "format_plan",
    "render_constraint",
    "render_expr",
    "parse_constraint_pred",
    "parse_prompt_string",
    "parse_query",
]
