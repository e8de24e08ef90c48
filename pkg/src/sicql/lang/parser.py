"""Recursive-descent parser for the pipe-SQL dialect with constraints.

Queries are linear pipelines: ``FROM t |> stage |> stage ...``. Each stage's
output schema is resolved left to right. When no catalog is supplied the
scanned table's columns are inferred from first use (unknown type); an
explicit catalog makes attribute resolution strict.
"""

from __future__ import annotations

import re as _re
from dataclasses import replace

from sicql import exprs
from sicql.errors import ParseError
from sicql.lang import tokens as tok
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
    RegexMatcher,
    RegexSpec,
    Scan,
    SetMatcher,
    SetStage,
    Stage,
    TypeSpec,
    ValueSetSpec,
    ValueType,
    Where,
    assign_constraint_ids,
    expr_attrs,
    generated_attr,
    is_semantic,
    stage_prompt,
)

TYPE_KEYWORDS = {"STRING", "INT", "FLOAT", "BOOL", "DATE"}
PRED_KEYWORDS = {"GROUNDED", "INCLUDES", "EXCLUDES", "SOUND", "RELEVANT"}

_PLACEHOLDER = _re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


def parse_prompt_string(text: str) -> PromptTemplate:
    """Parse a full ``p'...'`` literal (with quotes) into a template."""
    if not text or text[0].lower() != "p" or len(text) < 3 or text[1] != "'":
        raise ParseError("prompt string must start with p'", 1, 1)
    toks = tok.scan(text)
    if toks[0].type != tok.TokType.PROMPT or toks[1].type != tok.TokType.EOF:
        raise ParseError("not a single prompt string", 1, 1)
    return split_prompt(toks[0].value, 1, 1)


def split_prompt(content: str, line: int, column: int) -> PromptTemplate:
    """Split unquoted prompt content into literal and placeholder segments."""
    segments: list[object] = []
    pos = 0
    buf: list[str] = []

    def flush() -> None:
        if buf:
            segments.append("".join(buf))
            buf.clear()

    while pos < len(content):
        ch = content[pos]
        if ch == "{":
            if pos + 1 < len(content) and content[pos + 1] == "}":
                raise ParseError("empty placeholder {} in prompt string", line, column)
            m = _PLACEHOLDER.match(content, pos)
            if m:
                flush()
                segments.append(Placeholder(m.group(1)))
                pos = m.end()
                continue
        buf.append(ch)
        pos += 1
    flush()
    template = PromptTemplate(segments=tuple(segments))
    if not template.raw_text:
        raise ParseError("empty prompt string", line, column)
    return template


class Parser:
    def __init__(
        self,
        text: str,
        catalog: dict[str, dict[str, ValueType]] | None = None,
        default_retry: int = 1,
        default_failure_mode: FailureMode = FailureMode.CONTINUE,
        lenient_constraints: bool = False,
    ):
        self.text = text
        self.toks = tok.scan(text)
        self.pos = 0
        self.catalog = catalog
        self.default_retry = default_retry
        self.default_mode = default_failure_mode
        self.lenient = lenient_constraints

        self.stages: list[Stage] = []
        self.schema: dict[str, ValueType | None] = {}
        self.scan_cols: dict[str, ValueType | None] = {}
        self.aggregate_seen = False
        self.aliases: dict[str, int] = {}
        self.auto_where = 0

    # -- token helpers ------------------------------------------------------

    def cur(self) -> tok.Token:
        return self.toks[self.pos]

    def advance(self) -> tok.Token:
        t = self.toks[self.pos]
        if t.type != tok.TokType.EOF:
            self.pos += 1
        return t

    def at_keyword(self, *words: str) -> bool:
        t = self.cur()
        return t.type == tok.TokType.KEYWORD and t.value in words

    def match_keyword(self, *words: str) -> tok.Token | None:
        if self.at_keyword(*words):
            return self.advance()
        return None

    def expect_keyword(self, word: str) -> tok.Token:
        t = self.cur()
        if not self.at_keyword(word):
            raise ParseError(f"expected {word}, got {t.value or t.type.name!r}", t.line, t.column)
        return self.advance()

    def expect(self, ttype: tok.TokType, what: str) -> tok.Token:
        t = self.cur()
        if t.type != ttype:
            raise ParseError(f"expected {what}, got {t.value or t.type.name!r}", t.line, t.column)
        return self.advance()

    def error(self, msg: str, t: tok.Token | None = None) -> ParseError:
        t = t or self.cur()
        return ParseError(msg, t.line, t.column)

    # -- schema handling ----------------------------------------------------

    def resolve_attr(self, name: str, t: tok.Token) -> ValueType | None:
        if name in self.schema:
            return self.schema[name]
        if self.catalog is None and not self.aggregate_seen:
            # Inferred scan column of unknown type.
            self.scan_cols[name] = None
            self.schema[name] = None
            return None
        raise self.error(f"unknown attribute '{name}'", t)

    def check_expr(self, expr: Expr, t: tok.Token, require_bool: bool = False):
        for name in expr_attrs(expr):
            self.resolve_attr(name, t)
        try:
            etype = exprs.infer_type(expr, self.schema)
        except exprs.TypeMismatch as exc:
            raise self.error(str(exc), t) from exc
        if require_bool and etype is not None and etype != ValueType.BOOL:
            raise self.error(f"predicate must be boolean, got {etype.value}", t)
        return etype

    def check_prompt(self, template: PromptTemplate, t: tok.Token) -> None:
        for name in template.placeholders:
            self.resolve_attr(name, t)

    # -- entry point --------------------------------------------------------

    def parse(self) -> LogicalPlan:
        self.expect_keyword("FROM")
        table = self.expect(tok.TokType.IDENT, "table name").value
        if self.catalog is not None:
            if table not in self.catalog:
                raise self.error(f"unknown table '{table}'")
            self.scan_cols = dict(self.catalog[table])
        self.schema = dict(self.scan_cols)
        self.stages.append(Scan(table=table))
        self.aliases[table] = 0

        while self.cur().type == tok.TokType.PIPE:
            self.advance()
            self.parse_stage()
        t = self.cur()
        if t.type != tok.TokType.EOF:
            raise self.error(f"unexpected trailing input {t.value!r}", t)

        return self.finish()

    def finish(self) -> LogicalPlan:
        # Backfill scan schema (inference may have grown it) and propagate.
        stages = self._with_schemas(self.stages)
        stages = self._with_constraint_ids(stages)
        return LogicalPlan(stages=tuple(stages), source_text=self.text)

    def _with_schemas(self, stages: list[Stage]) -> list[Stage]:
        out: list[Stage] = []
        schema: dict[str, ValueType | None] = {}
        for st in stages:
            if isinstance(st, Scan):
                schema = dict(self.scan_cols)
            elif isinstance(st, SetStage):
                if isinstance(st.source, PromptTemplate):
                    pass  # type preserved
                else:
                    schema[st.attr] = exprs.infer_type(st.source, schema)
            elif isinstance(st, Extend):
                if st.out_type is not None:
                    schema[st.out_attr] = st.out_type
                elif isinstance(st.source, PromptTemplate):
                    schema[st.out_attr] = ValueType.STRING
                else:
                    schema[st.out_attr] = exprs.infer_type(st.source, schema)
            elif isinstance(st, Aggregate):
                schema = {name: schema[name] for name in st.group_by}
                schema[st.out_attr] = st.out_type or ValueType.STRING
            out.append(replace(st, output_schema=tuple(schema.items())))
        return out

    def _with_constraint_ids(self, stages: list[Stage]) -> list[Stage]:
        decls: list[ConstraintDecl] = []
        for st in stages:
            implicit = getattr(st, "implicit_constraint", None)
            if implicit is not None:
                decls.append(implicit)
            if isinstance(st, AssertStage):
                decls.append(st.decl)
        assigned = iter(assign_constraint_ids(decls))
        out: list[Stage] = []
        for st in stages:
            if getattr(st, "implicit_constraint", None) is not None:
                st = replace(st, implicit_constraint=next(assigned))
            if isinstance(st, AssertStage):
                st = replace(st, decl=next(assigned))
            out.append(st)
        return out

    # -- stages -------------------------------------------------------------

    def parse_stage(self) -> None:
        t = self.cur()
        if self.match_keyword("SET"):
            self.parse_set()
        elif self.match_keyword("EXTEND"):
            self.parse_extend()
        elif self.match_keyword("WHERE"):
            self.parse_where()
        elif self.match_keyword("AGGREGATE"):
            self.parse_aggregate()
        elif self.match_keyword("ASSERT"):
            self.parse_assert()
        else:
            raise self.error(
                f"expected SET, EXTEND, WHERE, AGGREGATE or ASSERT, got {t.value!r}", t
            )

    def _parse_annotation(self) -> OpAnnotation:
        if self.match_keyword("EXTRACTIVE"):
            return OpAnnotation.EXTRACTIVE
        if self.match_keyword("ABSTRACTIVE"):
            return OpAnnotation.ABSTRACTIVE
        return OpAnnotation.NONE

    def _register_alias(self, alias: str, t: tok.Token) -> None:
        if alias in self.aliases:
            raise self.error(f"duplicate alias '{alias}'", t)
        self.aliases[alias] = len(self.stages)

    def _implicit_type_constraint(self, target: str, vtype: ValueType | None) -> ConstraintDecl:
        return ConstraintDecl(
            constraint_id="",
            target=target,
            cclass=ConstraintClass.DOMAIN,
            domain=TypeSpec(vtype or ValueType.STRING),
            retry_threshold=self.default_retry,
            failure_mode=self.default_mode,
            origin="implicit-type",
        )

    def parse_set(self) -> None:
        t = self.cur()
        attr = self.expect(tok.TokType.IDENT, "attribute name").value
        eq = self.cur()
        if not (eq.type == tok.TokType.OP and eq.value == "="):
            raise self.error("expected '=' in SET", eq)
        self.advance()
        annotation = self._parse_annotation()
        source = self.parse_expr_or_prompt()
        current = self.resolve_attr(attr, t)
        implicit = None
        if isinstance(source, PromptTemplate):
            self.check_prompt(source, t)
            implicit = self._implicit_type_constraint(attr, current)
        else:
            if annotation != OpAnnotation.NONE:
                raise self.error("EXTRACTIVE/ABSTRACTIVE requires a prompt source", t)
            self.schema[attr] = self.check_expr(source, t)
        self._register_alias(attr, t)
        self.stages.append(
            SetStage(attr=attr, source=source, annotation=annotation, implicit_constraint=implicit)
        )

    def parse_extend(self) -> None:
        t = self.cur()
        annotation = self._parse_annotation()
        source = self.parse_expr_or_prompt()
        self.expect_keyword("AS")
        name_tok = self.cur()
        out_attr = self.expect(tok.TokType.IDENT, "output attribute").value
        out_type = self._parse_type_keyword()

        if out_attr in self.schema:
            raise self.error(f"attribute '{out_attr}' already exists", name_tok)
        implicit = None
        if isinstance(source, PromptTemplate):
            self.check_prompt(source, t)
            self.schema[out_attr] = out_type or ValueType.STRING
            implicit = self._implicit_type_constraint(out_attr, out_type or ValueType.STRING)
        else:
            if annotation != OpAnnotation.NONE:
                raise self.error("EXTRACTIVE/ABSTRACTIVE requires a prompt source", t)
            inferred = self.check_expr(source, t)
            if out_type is not None and inferred is not None and out_type != inferred:
                raise self.error(
                    f"declared type {out_type.value} does not match expression type {inferred.value}", t
                )
            self.schema[out_attr] = out_type or inferred
        self._register_alias(out_attr, name_tok)
        self.stages.append(
            Extend(
                source=source,
                out_attr=out_attr,
                out_type=out_type,
                annotation=annotation,
                implicit_constraint=implicit,
            )
        )

    def parse_where(self) -> None:
        t = self.cur()
        predicate = self.parse_expr_or_prompt()
        alias_tok = t
        alias = None
        if self.match_keyword("AS"):
            alias_tok = self.cur()
            alias = self.expect(tok.TokType.IDENT, "alias").value
        if isinstance(predicate, PromptTemplate):
            self.check_prompt(predicate, t)
        else:
            self.check_expr(predicate, t, require_bool=True)
        auto = alias is None
        if auto:
            self.auto_where += 1
            alias = f"where_{self.auto_where}"
        self._register_alias(alias, alias_tok)
        implicit = None
        if isinstance(predicate, PromptTemplate):
            implicit = self._implicit_type_constraint(alias, ValueType.BOOL)
        self.stages.append(
            Where(predicate=predicate, where_alias=alias, alias_is_auto=auto, implicit_constraint=implicit)
        )

    def parse_aggregate(self) -> None:
        t = self.cur()
        annotation = self._parse_annotation()
        if annotation == OpAnnotation.NONE:
            annotation = OpAnnotation.ABSTRACTIVE
        prompt_tok = self.cur()
        if prompt_tok.type != tok.TokType.PROMPT:
            raise self.error("AGGREGATE requires a prompt string", prompt_tok)
        self.advance()
        prompt = split_prompt(prompt_tok.value, prompt_tok.line, prompt_tok.column)
        self.expect_keyword("AS")
        name_tok = self.cur()
        out_attr = self.expect(tok.TokType.IDENT, "output attribute").value
        out_type = self._parse_type_keyword()
        group_by: list[str] = []
        if self.match_keyword("GROUP"):
            self.expect_keyword("BY")
            while True:
                g = self.expect(tok.TokType.IDENT, "grouping attribute")
                self.resolve_attr(g.value, g)
                group_by.append(g.value)
                if self.cur().type != tok.TokType.COMMA:
                    break
                self.advance()
        self.check_prompt(prompt, t)
        if out_attr in group_by:
            raise self.error(f"attribute '{out_attr}' already exists", name_tok)
        implicit = self._implicit_type_constraint(out_attr, out_type or ValueType.STRING)
        self._register_alias(out_attr, name_tok)
        self.schema = {name: self.schema[name] for name in group_by}
        self.schema[out_attr] = out_type or ValueType.STRING
        self.aggregate_seen = True
        self.stages.append(
            Aggregate(
                prompt=prompt,
                out_attr=out_attr,
                out_type=out_type,
                group_by=tuple(group_by),
                annotation=annotation,
                implicit_constraint=implicit,
            )
        )

    def _parse_type_keyword(self) -> ValueType | None:
        t = self.cur()
        if t.type == tok.TokType.KEYWORD and t.value in TYPE_KEYWORDS:
            self.advance()
            return ValueType(t.value)
        return None

    # -- ASSERT -------------------------------------------------------------

    def parse_assert(self) -> None:
        preds = [self.parse_pred()]
        while self.match_keyword("AND"):
            preds.append(self.parse_pred())

        retry = self.default_retry
        mode = self.default_mode
        if self.match_keyword("RETRY"):
            t = self.cur()
            if t.type == tok.TokType.OP and t.value == "-":
                raise self.error("retry threshold must be non-negative", t)
            retry = int(self.expect(tok.TokType.INT_LIT, "retry threshold").value)
        mode_tok = self.match_keyword("CONTINUE", "IGNORE", "ABORT")
        if mode_tok:
            mode = FailureMode(mode_tok.value)
            self.expect_keyword("ON")
            self.expect_keyword("FAIL")

        # Conjunctions desugar to one Assert stage per predicate sharing the
        # retry threshold and failure mode.
        for pred in preds:
            decl = replace(pred, retry_threshold=retry, failure_mode=mode)
            self.stages.append(AssertStage(decl=decl))

    def parse_pred(self) -> ConstraintDecl:
        t = self.cur()
        nxt = self.toks[self.pos + 1] if self.pos + 1 < len(self.toks) else None
        if (
            t.type == tok.TokType.IDENT
            and nxt is not None
            and nxt.type == tok.TokType.KEYWORD
            and nxt.value in PRED_KEYWORDS
        ):
            return self.parse_special_pred()
        expr = self.parse_expr(top_level_pred=True)
        if isinstance(expr, AttrRef):
            raise self.error(
                f"expected a predicate after '{expr.name}' (GROUNDED, INCLUDES, EXCLUDES, "
                "SOUND, RELEVANT or a boolean expression)",
                t,
            )
        self.check_expr(expr, t, require_bool=True)
        return self.classify_expr_pred(expr, t)

    def parse_special_pred(self) -> ConstraintDecl:
        t = self.cur()
        name = self.advance().value
        kw = self.advance().value
        if kw == "GROUNDED":
            self._validate_grounded_target(name, t)
            return ConstraintDecl(constraint_id="", target=name, cclass=ConstraintClass.GROUNDED)
        if kw == "SOUND":
            self._validate_sound_target(name, t)
            return ConstraintDecl(constraint_id="", target=name, cclass=ConstraintClass.SOUND)
        if kw == "RELEVANT":
            self._validate_generated_target(name, t, "RELEVANT")
            return ConstraintDecl(constraint_id="", target=name, cclass=ConstraintClass.RELEVANT)
        # INCLUDES / EXCLUDES
        self.resolve_attr(name, t)
        matcher = self.parse_matcher()
        cclass = ConstraintClass.INCLUDE if kw == "INCLUDES" else ConstraintClass.EXCLUDE
        return ConstraintDecl(constraint_id="", target=name, cclass=cclass, matcher=matcher)

    def _producer_index(self, attr: str) -> int | None:
        """Latest stage so far generating ``attr`` (None when only scanned)."""
        for i in range(len(self.stages) - 1, -1, -1):
            if generated_attr(self.stages[i]) == attr:
                return i
        return None

    def _validate_grounded_target(self, name: str, t: tok.Token) -> None:
        self.resolve_attr(name, t)
        if self.lenient:
            return
        idx = self._producer_index(name)
        if idx is None or not is_semantic(self.stages[idx]):
            raise self.error(
                f"GROUNDED requires '{name}' to be generated by a semantic operator", t
            )
        annotation = self.stages[idx].annotation
        if annotation == OpAnnotation.NONE:
            raise self.error(
                f"GROUNDED on '{name}' requires an EXTRACTIVE or ABSTRACTIVE annotation "
                "on its generating operator",
                t,
            )

    def _validate_sound_target(self, name: str, t: tok.Token) -> None:
        if self.lenient:
            return
        idx = self.aliases.get(name)
        if idx is None:
            raise self.error(f"SOUND targets unknown operator alias '{name}'", t)
        if not is_semantic(self.stages[idx]):
            raise self.error(f"SOUND requires a semantic operator, '{name}' is not one", t)

    def _validate_generated_target(self, name: str, t: tok.Token, what: str) -> None:
        self.resolve_attr(name, t)
        if self.lenient:
            return
        idx = self._producer_index(name)
        if idx is None or not is_semantic(self.stages[idx]):
            raise self.error(f"{what} requires '{name}' to be a prompt-generated attribute", t)

    def classify_expr_pred(self, expr: Expr, t: tok.Token) -> ConstraintDecl:
        """Recognize domain-shaped predicates; anything else is an assertion."""
        spec_target = self._domain_shape(expr)
        if spec_target is not None:
            target, spec = spec_target
            return ConstraintDecl(
                constraint_id="", target=target, cclass=ConstraintClass.DOMAIN, expr=expr, domain=spec
            )
        attrs = expr_attrs(expr)
        if not attrs:
            raise self.error("assertion must reference at least one attribute", t)
        target = max(attrs, key=lambda a: self._producer_index(a) or 0)
        return ConstraintDecl(
            constraint_id="", target=target, cclass=ConstraintClass.ASSERTION, expr=expr
        )

    def _domain_shape(self, expr: Expr):
        if (
            isinstance(expr, FuncCall)
            and expr.name.upper() == "REGEXP_CONTAINS"
            and len(expr.args) == 2
            and isinstance(expr.args[0], AttrRef)
            and isinstance(expr.args[1], Literal)
        ):
            return expr.args[0].name, RegexSpec(pattern=str(expr.args[1].value))
        if (
            isinstance(expr, Binary)
            and expr.op in ("<", "<=")
            and isinstance(expr.left, FuncCall)
            and expr.left.name.upper() == "LENGTH"
            and len(expr.left.args) == 1
            and isinstance(expr.left.args[0], AttrRef)
            and isinstance(expr.right, Literal)
            and isinstance(expr.right.value, int)
        ):
            limit = expr.right.value + (1 if expr.op == "<=" else 0)
            return expr.left.args[0].name, MaxLengthSpec(limit=limit)
        if isinstance(expr, InList) and isinstance(expr.operand, AttrRef):
            return expr.operand.name, ValueSetSpec(values=tuple(i.value for i in expr.items))
        return None

    def parse_matcher(self) -> Matcher:
        t = self.cur()
        if t.type == tok.TokType.STRING:
            self.advance()
            return LiteralMatcher(text=t.value)
        if t.type == tok.TokType.RAW_STRING:
            self.advance()
            self._validate_regex(t)
            return RegexMatcher(pattern=t.value)
        if t.type == tok.TokType.PROMPT:
            self.advance()
            return PromptMatcher(template=split_prompt(t.value, t.line, t.column))
        if t.type == tok.TokType.LPAREN:
            self.advance()
            values = []
            while True:
                s = self.expect(tok.TokType.STRING, "string literal")
                values.append(s.value)
                if self.cur().type == tok.TokType.COMMA:
                    self.advance()
                    continue
                break
            self.expect(tok.TokType.RPAREN, "')'")
            return SetMatcher(values=tuple(values))
        raise self.error("expected a string, regex, prompt or set matcher", t)

    def _validate_regex(self, t: tok.Token) -> None:
        try:
            _re.compile(t.value)
        except _re.error as exc:
            raise self.error(f"invalid regex: {exc}", t) from exc

    # -- expressions --------------------------------------------------------

    def parse_expr_or_prompt(self):
        t = self.cur()
        if t.type == tok.TokType.PROMPT:
            self.advance()
            return split_prompt(t.value, t.line, t.column)
        return self.parse_expr()

    def parse_expr(self, top_level_pred: bool = False) -> Expr:
        return self._parse_or(no_top_and=top_level_pred, depth=0)

    def _parse_or(self, no_top_and: bool, depth: int) -> Expr:
        left = self._parse_and(no_top_and, depth)
        while self.at_keyword("OR"):
            self.advance()
            right = self._parse_and(no_top_and, depth)
            left = Binary(op="OR", left=left, right=right)
        return left

    def _parse_and(self, no_top_and: bool, depth: int) -> Expr:
        left = self._parse_not(no_top_and, depth)
        while self.at_keyword("AND"):
            if no_top_and and depth == 0:
                # Top-level AND separates ASSERT predicates; stop here.
                return left
            self.advance()
            right = self._parse_not(no_top_and, depth)
            left = Binary(op="AND", left=left, right=right)
        return left

    def _parse_not(self, no_top_and: bool, depth: int) -> Expr:
        if self.match_keyword("NOT"):
            return Unary(op="NOT", operand=self._parse_not(no_top_and, depth))
        return self._parse_cmp(no_top_and, depth)

    def _parse_cmp(self, no_top_and: bool, depth: int) -> Expr:
        left = self._parse_add(no_top_and, depth)
        t = self.cur()
        if t.type == tok.TokType.OP and t.value in ("=", "==", "<>", "<", "<=", ">", ">="):
            self.advance()
            right = self._parse_add(no_top_and, depth)
            return Binary(op="=" if t.value == "==" else t.value, left=left, right=right)
        if self.at_keyword("IN"):
            self.advance()
            self.expect(tok.TokType.LPAREN, "'('")
            items = [self._parse_literal()]
            while self.cur().type == tok.TokType.COMMA:
                self.advance()
                items.append(self._parse_literal())
            self.expect(tok.TokType.RPAREN, "')'")
            return InList(operand=left, items=tuple(items))
        return left

    def _parse_add(self, no_top_and: bool, depth: int) -> Expr:
        left = self._parse_mul(no_top_and, depth)
        while True:
            t = self.cur()
            if t.type == tok.TokType.OP and t.value in ("+", "-", "||"):
                self.advance()
                left = Binary(op=t.value, left=left, right=self._parse_mul(no_top_and, depth))
            else:
                return left

    def _parse_mul(self, no_top_and: bool, depth: int) -> Expr:
        left = self._parse_unary(no_top_and, depth)
        while True:
            t = self.cur()
            if t.type == tok.TokType.OP and t.value in ("*", "/", "%"):
                self.advance()
                left = Binary(op=t.value, left=left, right=self._parse_unary(no_top_and, depth))
            else:
                return left

    def _parse_unary(self, no_top_and: bool, depth: int) -> Expr:
        t = self.cur()
        if t.type == tok.TokType.OP and t.value == "-":
            self.advance()
            return Unary(op="-", operand=self._parse_unary(no_top_and, depth))
        return self._parse_cast(no_top_and, depth)

    def _parse_cast(self, no_top_and: bool, depth: int) -> Expr:
        expr = self._parse_primary(no_top_and, depth)
        while self.cur().type == tok.TokType.OP and self.cur().value == "::":
            self.advance()
            t = self.cur()
            vtype = self._parse_type_keyword()
            if vtype is None:
                raise self.error("expected a type keyword after '::'", t)
            expr = Cast(operand=expr, to_type=vtype)
        return expr

    def _parse_primary(self, no_top_and: bool, depth: int) -> Expr:
        t = self.cur()
        if t.type == tok.TokType.LPAREN:
            self.advance()
            inner = self._parse_or(no_top_and, depth + 1)
            self.expect(tok.TokType.RPAREN, "')'")
            return inner
        if t.type in (
            tok.TokType.INT_LIT,
            tok.TokType.FLOAT_LIT,
            tok.TokType.STRING,
            tok.TokType.RAW_STRING,
        ) or self.at_keyword("TRUE", "FALSE", "NULL"):
            return self._parse_literal()
        if self.at_keyword("CURRENT_DATE"):
            self.advance()
            return FuncCall(name="CURRENT_DATE", args=())
        if t.type == tok.TokType.IDENT:
            self.advance()
            if self.cur().type == tok.TokType.LPAREN:
                self.advance()
                args: list[Expr] = []
                if self.cur().type != tok.TokType.RPAREN:
                    args.append(self._parse_or(no_top_and, depth + 1))
                    while self.cur().type == tok.TokType.COMMA:
                        self.advance()
                        args.append(self._parse_or(no_top_and, depth + 1))
                self.expect(tok.TokType.RPAREN, "')'")
                call = FuncCall(name=t.value.upper(), args=tuple(args))
                if call.name == "REGEXP_CONTAINS" and len(args) == 2:
                    arg = args[1]
                    if isinstance(arg, Literal) and arg.vtype == ValueType.STRING:
                        try:
                            _re.compile(str(arg.value))
                        except _re.error as exc:
                            raise self.error(f"invalid regex: {exc}", t) from exc
                return call
            return AttrRef(name=t.value)
        raise self.error(f"expected an expression, got {t.value or t.type.name!r}", t)

    def _parse_literal(self) -> Literal:
        t = self.cur()
        if t.type == tok.TokType.INT_LIT:
            self.advance()
            return Literal(value=int(t.value), vtype=ValueType.INT)
        if t.type == tok.TokType.FLOAT_LIT:
            self.advance()
            return Literal(value=float(t.value), vtype=ValueType.FLOAT)
        if t.type == tok.TokType.STRING:
            self.advance()
            return Literal(value=t.value, vtype=ValueType.STRING)
        if t.type == tok.TokType.RAW_STRING:
            self.advance()
            return Literal(value=t.value, vtype=ValueType.STRING, raw=True)
        if self.at_keyword("TRUE", "FALSE"):
            kw = self.advance()
            return Literal(value=kw.value == "TRUE", vtype=ValueType.BOOL)
        if self.at_keyword("NULL"):
            self.advance()
            return Literal(value=None, vtype=None)
        raise self.error(f"expected a literal, got {t.value or t.type.name!r}", t)


def parse_query(
    text: str,
    catalog: dict[str, dict[str, ValueType]] | None = None,
    default_retry: int = 1,
    default_failure_mode: FailureMode = FailureMode.CONTINUE,
) -> LogicalPlan:
    """Parse a query into a logical plan with resolved schemas.

    ``ASSERT a AND b`` conjunctions are desugared into separate assert stages
    and declared output types install implicit type-domain constraints on
    their semantic operators.
    """
    return Parser(
        text,
        catalog=catalog,
        default_retry=default_retry,
        default_failure_mode=default_failure_mode,
    ).parse()


def parse_constraint_pred(
    text: str,
    default_retry: int = 1,
    default_failure_mode: FailureMode = FailureMode.CONTINUE,
) -> ConstraintDecl:
    """Parse a standalone ASSERT body (used by the constraint store).

    Context-dependent checks (grounding annotations, operator aliases) are
    skipped since there is no surrounding query.
    """
    parser = Parser(
        f"FROM _store |> ASSERT {text}",
        default_retry=default_retry,
        default_failure_mode=default_failure_mode,
        lenient_constraints=True,
    )
    plan = parser.parse()
    decls = plan.constraints()
    if len(decls) != 1:
        raise ParseError("expected exactly one constraint predicate", 1, 1)
    return decls[0]
