"""Typed plan representation: expressions, prompt templates, constraints, stages.

All nodes are frozen dataclasses so plans compare structurally; rewrites build
modified copies via ``dataclasses.replace``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union


class ValueType(Enum):
    STRING = "STRING"
    INT = "INT"
    FLOAT = "FLOAT"
    BOOL = "BOOL"
    DATE = "DATE"


class FailureMode(Enum):
    CONTINUE = "CONTINUE"
    IGNORE = "IGNORE"
    ABORT = "ABORT"


class OpAnnotation(Enum):
    NONE = "NONE"
    EXTRACTIVE = "EXTRACTIVE"
    ABSTRACTIVE = "ABSTRACTIVE"


class ConstraintClass(Enum):
    DOMAIN = "domain"
    INCLUDE = "include"
    EXCLUDE = "exclude"
    GROUNDED = "grounded"
    SOUND = "sound"
    RELEVANT = "relevant"
    ASSERTION = "assert"


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    value: object  # None | bool | int | float | str
    vtype: ValueType | None  # None for NULL literal
    raw: bool = False  # r'...' source form (regex literal)


@dataclass(frozen=True)
class AttrRef:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # '-' | 'NOT'
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # comparison, arithmetic, AND/OR, '||'
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class FuncCall:
    name: str  # LENGTH | REGEXP_CONTAINS | DATE_PART | AGE | CURRENT_DATE
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Cast:
    operand: "Expr"
    to_type: ValueType


@dataclass(frozen=True)
class InList:
    operand: "Expr"
    items: tuple[Literal, ...]


Expr = Union[Literal, AttrRef, Unary, Binary, FuncCall, Cast, InList]


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Placeholder:
    name: str


@dataclass(frozen=True)
class PromptTemplate:
    """A ``p'...'`` literal split into literal text and ``{attr}`` segments.

    Keeping pre-split segments means text appended later (e.g. injected
    constraint instructions) is always literal and can never introduce new
    placeholders, even if it contains braces.
    """

    segments: tuple[Union[str, Placeholder], ...]

    @property
    def placeholders(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.segments if isinstance(s, Placeholder))

    @property
    def raw_text(self) -> str:
        parts = []
        for seg in self.segments:
            parts.append("{%s}" % seg.name if isinstance(seg, Placeholder) else seg)
        return "".join(parts)

    def render(self, values: dict[str, object]) -> str:
        parts = []
        for seg in self.segments:
            if isinstance(seg, Placeholder):
                v = values.get(seg.name)
                parts.append("" if v is None else str(v))
            else:
                parts.append(seg)
        return "".join(parts)

    def append_text(self, text: str) -> "PromptTemplate":
        return PromptTemplate(segments=self.segments + (text,))


# ---------------------------------------------------------------------------
# Matchers and domain specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LiteralMatcher:
    text: str


@dataclass(frozen=True)
class RegexMatcher:
    pattern: str


@dataclass(frozen=True)
class SetMatcher:
    values: tuple[str, ...]


@dataclass(frozen=True)
class PromptMatcher:
    template: PromptTemplate


Matcher = Union[LiteralMatcher, RegexMatcher, SetMatcher, PromptMatcher]


@dataclass(frozen=True)
class TypeSpec:
    vtype: ValueType
    allow_null: bool = False


@dataclass(frozen=True)
class RegexSpec:
    pattern: str


@dataclass(frozen=True)
class RangeSpec:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"range lo {self.lo} > hi {self.hi}")


@dataclass(frozen=True)
class MaxLengthSpec:
    """Values pass while ``len(value) < limit``."""

    limit: int


@dataclass(frozen=True)
class ValueSetSpec:
    values: tuple[object, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("value set must be non-empty")


DomainSpec = Union[TypeSpec, RegexSpec, RangeSpec, MaxLengthSpec, ValueSetSpec]


# ---------------------------------------------------------------------------
# Constraints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintDecl:
    """One declarative integrity constraint after desugaring.

    ``origin`` records how the constraint entered the plan (written by the
    user, implied by a type declaration, attached by the default-relevance
    rewrite, or inserted by grounding-lineage expansion).
    """

    constraint_id: str
    target: str  # attribute name or operator alias
    cclass: ConstraintClass
    expr: Expr | None = None  # DOMAIN shape source / ASSERTION predicate
    matcher: Matcher | None = None  # INCLUDE / EXCLUDE
    domain: DomainSpec | None = None  # DOMAIN only
    retry_threshold: int = 1
    failure_mode: FailureMode = FailureMode.CONTINUE
    origin: str = "explicit"  # explicit | implicit-type | default-relevance | lineage

    def with_id(self, constraint_id: str) -> "ConstraintDecl":
        return replace(self, constraint_id=constraint_id)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

Schema = tuple[tuple[str, ValueType | None], ...]


@dataclass(frozen=True)
class Scan:
    table: str
    output_schema: Schema = ()

    @property
    def alias(self) -> str:
        return self.table


@dataclass(frozen=True)
class SetStage:
    attr: str
    source: Union[Expr, PromptTemplate]
    annotation: OpAnnotation = OpAnnotation.NONE
    implicit_constraint: ConstraintDecl | None = None
    output_schema: Schema = ()

    @property
    def alias(self) -> str:
        return self.attr


@dataclass(frozen=True)
class Extend:
    source: Union[Expr, PromptTemplate]
    out_attr: str
    out_type: ValueType | None = None
    annotation: OpAnnotation = OpAnnotation.NONE
    implicit_constraint: ConstraintDecl | None = None
    output_schema: Schema = ()

    @property
    def alias(self) -> str:
        return self.out_attr


@dataclass(frozen=True)
class Where:
    predicate: Union[Expr, PromptTemplate]
    where_alias: str = ""
    alias_is_auto: bool = True
    implicit_constraint: ConstraintDecl | None = None
    output_schema: Schema = ()

    @property
    def alias(self) -> str:
        return self.where_alias


@dataclass(frozen=True)
class Aggregate:
    prompt: PromptTemplate
    out_attr: str
    out_type: ValueType | None = None
    group_by: tuple[str, ...] = ()
    annotation: OpAnnotation = OpAnnotation.ABSTRACTIVE
    implicit_constraint: ConstraintDecl | None = None
    output_schema: Schema = ()

    @property
    def alias(self) -> str:
        return self.out_attr


@dataclass(frozen=True)
class AssertStage:
    decl: ConstraintDecl
    output_schema: Schema = ()

    @property
    def alias(self) -> None:
        return None


# Reserved node kinds: representable so downstream tooling has stable names,
# but the dialect neither parses nor executes them.
@dataclass(frozen=True)
class Join:
    left_table: str
    condition: "Expr"
    output_schema: Schema = ()


@dataclass(frozen=True)
class TopK:
    prompt: PromptTemplate
    k: int
    output_schema: Schema = ()


Stage = Union[Scan, SetStage, Extend, Where, Aggregate, AssertStage]

#: Stages that can be backed by a prompt (semantic operators).
PROMPT_CAPABLE = (SetStage, Extend, Where, Aggregate)


def stage_prompt(stage: Stage) -> PromptTemplate | None:
    """Return the stage's prompt template when it is a semantic operator."""
    if isinstance(stage, (SetStage, Extend)) and isinstance(stage.source, PromptTemplate):
        return stage.source
    if isinstance(stage, Where) and isinstance(stage.predicate, PromptTemplate):
        return stage.predicate
    if isinstance(stage, Aggregate):
        return stage.prompt
    return None


def is_semantic(stage: Stage) -> bool:
    return stage_prompt(stage) is not None


def generated_attr(stage: Stage) -> str | None:
    """Attribute created or rewritten by the stage, if any."""
    if isinstance(stage, SetStage):
        return stage.attr
    if isinstance(stage, Extend):
        return stage.out_attr
    if isinstance(stage, Aggregate):
        return stage.out_attr
    return None


def referenced_attrs(stage: Stage) -> tuple[str, ...]:
    """Attributes the stage reads (expression refs + prompt placeholders)."""
    src: Expr | PromptTemplate | None
    if isinstance(stage, (SetStage, Extend)):
        src = stage.source
    elif isinstance(stage, Where):
        src = stage.predicate
    elif isinstance(stage, Aggregate):
        src = stage.prompt
    else:
        return ()
    if isinstance(src, PromptTemplate):
        return src.placeholders
    return tuple(expr_attrs(src))


def expr_attrs(expr: Expr) -> list[str]:
    """Attribute names referenced by an expression, in first-use order."""
    out: list[str] = []

    def walk(e: Expr) -> None:
        if isinstance(e, AttrRef):
            if e.name not in out:
                out.append(e.name)
        elif isinstance(e, Unary):
            walk(e.operand)
        elif isinstance(e, Binary):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, FuncCall):
            for a in e.args:
                walk(a)
        elif isinstance(e, Cast):
            walk(e.operand)
        elif isinstance(e, InList):
            walk(e.operand)

    walk(expr)
    return out


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogicalPlan:
    stages: tuple[Stage, ...]
    source_text: str = field(default="", compare=False)

    def aliases(self) -> dict[str, int]:
        """Operator alias -> stage index (asserts carry no alias)."""
        out: dict[str, int] = {}
        for i, st in enumerate(self.stages):
            alias = st.alias
            if alias:
                out[alias] = i
        return out

    def constraints(self) -> list[ConstraintDecl]:
        """Explicit constraint declarations in stage order."""
        return [st.decl for st in self.stages if isinstance(st, AssertStage)]

    def all_constraints(self) -> list[ConstraintDecl]:
        """Explicit plus implicit type-domain constraints, in stage order."""
        out: list[ConstraintDecl] = []
        for st in self.stages:
            implicit = getattr(st, "implicit_constraint", None)
            if implicit is not None:
                out.append(implicit)
            if isinstance(st, AssertStage):
                out.append(st.decl)
        return out

    def replace_stages(self, stages: list[Stage]) -> "LogicalPlan":
        return LogicalPlan(stages=tuple(stages), source_text=self.source_text)


def assign_constraint_ids(
    decls: list[ConstraintDecl], taken: set[str] | None = None
) -> list[ConstraintDecl]:
    """Give each declaration a stable id ``<target>.<class>[N]``.

    Ids are deterministic in declaration order; numbering disambiguates
    repeats (``med_hist_sum.domain``, ``med_hist_sum.domain2``).
    """
    taken = set(taken or ())
    out = []
    for decl in decls:
        tag = "type" if decl.origin == "implicit-type" else decl.cclass.value
        base = f"{decl.target}.{tag}"
        cid, n = base, 1
        while cid in taken:
            n += 1
            cid = f"{base}{n}"
        taken.add(cid)
        out.append(decl.with_id(cid))
    return out
