"""Stage-at-a-time plan execution with enforcement, retries and lineage.

Each operator block runs its stage and then its attached checks. Semantic
operators retry with feedback and few-shot exemplars until the violated
constraint's threshold is exhausted; deterministic stages cannot produce a
different value on retry, so their violations go straight to the failure
mode. Proactive implementations (token masks, stream guards) run inside the
model call. Tuple ids are assigned in deterministic processing order, so a
fixed (query, data, seed, config) yields a byte-identical results file.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace
from pathlib import Path

from sicql.automata import StreamGuard, build_suffix_automaton, regex_to_dfa
from sicql.checkers import (
    PASS,
    VIOLATION,
    CheckOutcome,
    check_domain,
    check_grounding_abstractive,
    check_grounding_extractive,
    check_ie,
    check_relevance,
    check_soundness,
    domain_regex,
    eval_assertion,
)
from sicql.config import EngineConfig
from sicql.engine.data import Relation, RowTuple, load_table, row_to_json
from sicql.engine.exemplars import ExemplarCache
from sicql.errors import AbortRun, EngineError, ModelError
from sicql.exprs import coerce_to_type, eval_expr
from sicql.lang.ast import (
    Aggregate,
    AssertStage,
    ConstraintClass,
    ConstraintDecl,
    Extend,
    FailureMode,
    OpAnnotation,
    PromptTemplate,
    Scan,
    SetStage,
    Stage,
    ValueType,
    Where,
    generated_attr,
    is_semantic,
    stage_prompt,
)
from sicql.lang.formatter import describe_constraint
from sicql.logical import Block, to_blocks
from sicql.models.base import (
    CONTRACT_BOOL_COT,
    CONTRACT_TEXT,
    ModelRequest,
    ModelResponse,
    parse_bool,
)
from sicql.physical import MODE_MASK, MODE_REACTIVE, MODE_STREAM, ImplCandidate, PhysicalPlan

FEEDBACK_TEMPLATE = "\n\nPrevious output: {output}\nViolated constraint: {constraint}\nReason: {reason}"


@dataclass
class RunContext:
    run_id: str
    seed: int = 0
    config: EngineConfig = field(default_factory=EngineConfig)
    client: object = None
    writer: object = None  # observability RunWriter, optional
    cache: ExemplarCache = None

    def __post_init__(self):
        if self.cache is None:
            self.cache = ExemplarCache(self.config.exemplar_capacity)

    @property
    def current_date(self) -> dt.date:
        return self.config.current_date or dt.date.today()


@dataclass
class RunResult:
    status: str  # completed | aborted | failed
    relation: Relation | None
    totals: dict
    error: str | None = None


# Dispositions of one unit through a block.
_KEEP = "keep"
_FILTERED = "filtered"
_IGNORED = "ignored"


@dataclass
class _UnitOutcome:
    disposition: str
    row: RowTuple | None = None


class _JudgeProxy:
    """Routes judge calls through the run's cost accounting."""

    def __init__(self, client, executor: "Executor"):
        self._client = client
        self._executor = executor

    def judge(self, task: str, input_text: str, output: str, mode: str):
        result = self._client.judge(task, input_text, output, mode)
        self._executor.total_cost += getattr(result, "cost", 0.0)
        return result


class Executor:
    def __init__(self, plan: PhysicalPlan, ctx: RunContext):
        self.plan = plan
        self.logical = plan.logical
        self.choices = plan.choices
        self.ctx = ctx
        self.blocks: list[Block] = to_blocks(plan.logical)
        self._tuple_counter = 0
        self._dfa_cache: dict[str, object] = {}
        self.total_cost = 0.0
        self.total_retries = 0
        self.dropped_values: list[dict] = []  # IGNOREd tuples, for group suppression
        self._judge = _JudgeProxy(ctx.client, self) if ctx.client is not None else None
        self._producer_info = self._index_producers()

    def _index_producers(self) -> dict[str, tuple[OpAnnotation, tuple[str, ...], str]]:
        """Per constraint id: its target's producing operator context.

        Grounding and relevance checks compare against the producer's inputs
        and task, wherever the assert stage currently sits in the plan.
        """
        from sicql.logical import producer_index

        out: dict[str, tuple[OpAnnotation, tuple[str, ...], str]] = {}
        stages = self.logical.stages
        for i, st in enumerate(stages):
            if not isinstance(st, AssertStage):
                continue
            pj = producer_index(stages, st.decl.target, i)
            if pj is None:
                continue
            producer = stages[pj]
            prompt = stage_prompt(producer)
            placeholders: tuple[str, ...] = ()
            raw = ""
            if prompt is not None:
                seen: list[str] = []
                for name in prompt.placeholders:
                    if name not in seen:
                        seen.append(name)
                placeholders = tuple(seen)
                raw = prompt.raw_text
            out[st.decl.constraint_id] = (
                getattr(producer, "annotation", OpAnnotation.NONE),
                placeholders,
                raw,
            )
        return out

    # -- id and record helpers -------------------------------------------------

    def _new_tuple_id(self) -> str:
        self._tuple_counter += 1
        return f"t{self._tuple_counter}"

    def _record_check(
        self,
        decl: ConstraintDecl,
        impl_mode: str,
        mechanism: str,
        op_alias: str,
        tuple_id: str,
        attempt: int,
        outcome: CheckOutcome,
        checked_value,
        source,
        annotation: OpAnnotation,
        cost: float = 0.0,
    ) -> None:
        if self.ctx.writer is None:
            return
        self.ctx.writer.record_constraint_invocation(
            constraint_id=decl.constraint_id,
            op_alias=op_alias,
            tuple_id=tuple_id,
            attempt=attempt,
            checked_value=checked_value,
            source_excerpt=source,
            predicted_label=outcome.verdict,
            confidence=outcome.confidence,
            mechanism=mechanism,
            mode=impl_mode,
            description=describe_constraint(decl, annotation),
            cost=cost,
        )

    def _checked(self, fn):
        """Run a check and capture the judge cost it consumed."""
        before = self.total_cost
        outcome = fn()
        return outcome, self.total_cost - before

    def _record_lineage(self, child: str, parents: tuple[str, ...], op_alias: str) -> None:
        if self.ctx.writer is None:
            return
        for parent in parents:
            self.ctx.writer.record_lineage(child, parent, op_alias)

    # -- main loop ---------------------------------------------------------------

    def run(self, datasets: dict) -> RunResult:
        relation: Relation | None = None
        scanned = 0
        status, error = "completed", None
        try:
            for index, block in enumerate(self.blocks):
                relation = self._run_block(index, block, relation, datasets)
                if isinstance(block.op, Scan):
                    scanned = len(relation)
        except AbortRun as exc:
            status, error = "aborted", str(exc)
            relation = None
        except (EngineError, ModelError) as exc:
            status, error = "failed", str(exc)
            relation = None

        flagged = sum(1 for r in relation.rows if r.flags) if relation else 0
        totals = {
            "cost_units": round(self.total_cost, 6),
            "tuples_in": scanned,
            "tuples_out": len(relation) if relation else 0,
            "flagged": flagged,
            "retries": self.total_retries,
            "operator_reliability": {
                k: round(v, 6) for k, v in self.plan.estimate.operator_reliability.items()
            },
        }
        if self.ctx.writer is not None:
            if relation is not None:
                for row in relation.rows:
                    self.ctx.writer.write_result_row(row_to_json(row))
            self.ctx.writer.finalize(status, totals)
        return RunResult(status=status, relation=relation, totals=totals, error=error)

    def _run_block(self, index: int, block: Block, relation: Relation | None, datasets: dict) -> Relation:
        op = block.op
        if isinstance(op, Scan):
            units = self._scan_rows(op, datasets)
        elif isinstance(op, Aggregate):
            units = self._group_units(op, relation)
        else:
            units = [(row, None) for row in relation.rows]

        stats = {"in": len(units), "out": 0, "ignored": 0, "filtered": 0, "discarded": 0}
        out_rows: list[RowTuple] = []
        try:
            for position, (unit, group_rows) in enumerate(units):
                if unit is None:  # suppressed aggregate group
                    stats["ignored"] += 1
                    continue
                outcome = self._process_unit(block, unit, group_rows)
                if outcome.disposition == _KEEP:
                    out_rows.append(outcome.row)
                    stats["out"] += 1
                else:
                    stats[outcome.disposition] += 1
        except AbortRun:
            stats["discarded"] = stats["in"] - stats["out"] - stats["ignored"] - stats["filtered"]
            self._flush_stats(index, op, stats)
            raise
        self._flush_stats(index, op, stats)
        columns = [name for name, _ in op.output_schema] or (relation.columns if relation else [])
        return Relation(columns=list(columns), rows=out_rows)

    def _flush_stats(self, index: int, op: Stage, stats: dict) -> None:
        if self.ctx.writer is None:
            return
        self.ctx.writer.record_stage_stats(
            index=index,
            alias=op.alias or type(op).__name__.lower(),
            kind=type(op).__name__,
            tuples_in=stats["in"],
            tuples_out=stats["out"],
            ignored=stats["ignored"],
            filtered=stats["filtered"],
            discarded=stats["discarded"],
        )

    def _scan_rows(self, op: Scan, datasets: dict):
        if op.table not in datasets:
            raise EngineError(f"missing table '{op.table}'")
        source = datasets[op.table]
        if isinstance(source, (str, Path)):
            raw_rows = load_table(source)
        else:
            raw_rows = list(source)
        declared = [name for name, _ in op.output_schema]
        if raw_rows and declared:
            available = set()
            for r in raw_rows:
                available.update(r.keys())
            missing = [c for c in declared if c not in available]
            if missing:
                raise EngineError(f"table '{op.table}' lacks required columns: {missing}")
        rows = [
            RowTuple(tuple_id=self._new_tuple_id(), values=dict(raw), flags=set(), parents=())
            for raw in raw_rows
        ]
        return [(row, None) for row in rows]

    def _group_units(self, op: Aggregate, relation: Relation):
        """Group rows by key in first-appearance order; suppress groups that
        would have contained an IGNOREd tuple."""
        groups: dict[tuple, list[RowTuple]] = {}
        order: list[tuple] = []
        for row in relation.rows:
            key = tuple(row.values.get(g) for g in op.group_by)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(row)
        suppressed = set()
        for values in self.dropped_values:
            if all(g in values for g in op.group_by):
                suppressed.add(tuple(values.get(g) for g in op.group_by))
        units = []
        for key in order:
            rows = groups[key]
            if key in suppressed:
                units.append((None, rows))
                continue
            values = {g: v for g, v in zip(op.group_by, key)}
            carrier = RowTuple(
                tuple_id="",  # assigned when the output tuple is built
                values=values,
                flags=set().union(*(r.flags for r in rows)),
                parents=tuple(r.tuple_id for r in rows),
            )
            units.append((carrier, rows))
        return units

    # -- per-unit processing --------------------------------------------------------

    def _process_unit(self, block: Block, unit: RowTuple, group_rows) -> _UnitOutcome:
        op = block.op
        if is_semantic(op):
            return self._run_semantic(block, unit, group_rows)
        return self._run_deterministic(block, unit)

    # ..... deterministic stages (scan, expression set/extend, expression where)

    def _run_deterministic(self, block: Block, unit: RowTuple) -> _UnitOutcome:
        op = block.op
        if isinstance(op, (SetStage, Extend)):
            value = eval_expr(op.source, unit.values, self.ctx.current_date)
            attr = generated_attr(op)
            values = dict(unit.values)
            values[attr] = value
            row = RowTuple(
                tuple_id=self._new_tuple_id(),
                values=values,
                flags=set(unit.flags),
                parents=(unit.tuple_id,),
            )
            self._record_lineage(row.tuple_id, row.parents, op.alias)
        elif isinstance(op, Where):
            decision = eval_expr(op.predicate, unit.values, self.ctx.current_date)
            if decision is not True:
                return _UnitOutcome(_FILTERED)
            row = unit
        else:  # Scan
            row = unit

        # Single check pass: a deterministic stage cannot produce a different
        # value on retry, so violations go straight to the failure mode.
        for a in block.asserts:
            impl = self._impl_for(a.decl)
            outcome, spent = self._checked(
                lambda: self._run_reactive_check(a.decl, impl, block, row, None, None, None)
            )
            self._record_check(
                a.decl, impl.mode, impl.mechanism, op.alias or "scan", row.tuple_id, 0,
                outcome, row.values.get(a.decl.target), None, OpAnnotation.NONE, cost=spent,
            )
            if outcome.ok:
                continue
            disposition = self._apply_failure_mode(a.decl, outcome, row)
            if disposition is not None:
                return disposition
        return _UnitOutcome(_KEEP, row)

    # ..... semantic operators

    def _run_semantic(self, block: Block, unit: RowTuple, group_rows) -> _UnitOutcome:
        op = block.op
        prompt = stage_prompt(op)
        annotation = getattr(op, "annotation", OpAnnotation.NONE)
        out_attr = generated_attr(op)
        own_targets = {t for t in (out_attr, op.alias) if t}

        render_values = self._render_values(op, unit, group_rows)
        base_prompt = prompt.render(render_values)
        source_text = self._source_text(prompt, render_values)
        out_type = self._out_type(op)
        needs_cot = any(a.decl.cclass == ConstraintClass.SOUND for a in block.asserts)
        contract = CONTRACT_BOOL_COT if needs_cot else CONTRACT_TEXT

        mask_decls = [a.decl for a in block.asserts if self._impl_for(a.decl).mode == MODE_MASK]
        stream_decls = [a.decl for a in block.asserts if self._impl_for(a.decl).mode == MODE_STREAM]
        reactive_asserts = [a for a in block.asserts if self._impl_for(a.decl).mode == MODE_REACTIVE]
        masks = tuple(self._build_mask(decl, source_text) for decl in mask_decls)

        attempts = 0
        feedback = ""
        while True:
            attempts += 1
            attempt_idx = attempts - 1
            prompt_text = base_prompt + feedback if feedback else base_prompt
            guard = self._build_guard(stream_decls, source_text)
            request = ModelRequest(
                prompt=prompt_text,
                contract=contract,
                out_type=out_type,
                fields={k: "" if v is None else str(v) for k, v in render_values.items()},
                masks=masks,
                guard=guard,
                seed=self.ctx.seed,
                attempt=attempt_idx,
                op_alias=op.alias,
            )
            response = self._invoke_model(request, masks)
            self.total_cost += response.cost
            if self.ctx.writer is not None:
                self.ctx.writer.record_op_invocation(
                    op.alias, unit.tuple_id or "(group)", attempt_idx,
                    prompt_text, response.text, response.cost,
                )
            if guard is not None:
                check_costs = getattr(guard, "check_costs", [])
                for gi, outcome in enumerate(guard.outcomes):
                    spent = check_costs[gi] if gi < len(check_costs) else 0.0
                    for decl in stream_decls:
                        self._record_check(
                            decl, MODE_STREAM, "model", op.alias, unit.tuple_id or "(group)",
                            attempt_idx, outcome, response.text, source_text, annotation,
                            cost=spent,
                        )

            violated: tuple[ConstraintDecl, CheckOutcome] | None = None
            remaining: list[AssertStage] = []
            value = decision = None

            parsed, parse_outcome = self._parse_output(op, response, out_type, needs_cot)
            implicit = getattr(op, "implicit_constraint", None)
            if implicit is not None:
                self._record_check(
                    implicit, MODE_REACTIVE, "deterministic", op.alias,
                    unit.tuple_id or "(group)", attempt_idx, parse_outcome,
                    response.text, None, annotation,
                )
            if not parse_outcome.ok:
                violated = (implicit or self._synthetic_type_decl(op, out_type), parse_outcome)
                remaining = list(reactive_asserts)
                if not isinstance(op, Where):
                    # CONTINUE propagates the raw, unparseable output.
                    value = response.text
            else:
                if isinstance(op, Where):
                    decision = parsed
                else:
                    value = parsed
                if response.guard_violation is not None:
                    # Fail-mode guard violations enter the loop like a
                    # reactive violation of the stream-checked constraint.
                    violated = (stream_decls[0], response.guard_violation)
                    remaining = list(reactive_asserts)
                else:
                    merged = dict(unit.values)
                    if out_attr is not None:
                        merged[out_attr] = value
                    for i, a in enumerate(reactive_asserts):
                        impl = self._impl_for(a.decl)
                        outcome, spent = self._checked(
                            lambda: self._run_reactive_check(
                                a.decl, impl, block, RowTuple("", merged, set(), ()),
                                response, source_text, base_prompt, decision=decision,
                            )
                        )
                        self._record_check(
                            a.decl, impl.mode, impl.mechanism, op.alias,
                            unit.tuple_id or "(group)", attempt_idx, outcome,
                            merged.get(a.decl.target, value), source_text, annotation,
                            cost=spent,
                        )
                        if not outcome.ok:
                            violated = (a.decl, outcome)
                            remaining = reactive_asserts[i + 1:]
                            break

            if violated is None:
                self.ctx.cache.add(op.alias, base_prompt, response.text)
                return self._emit(block, unit, group_rows, value, decision, set())

            decl, outcome = violated
            retryable = decl.target in own_targets or decl.origin == "implicit-type"
            if retryable and attempts <= decl.retry_threshold:
                self.total_retries += 1
                feedback = self._feedback(op.alias, base_prompt, decl, annotation, response.text, outcome)
                continue

            # Retries exhausted (or the constraint targets another operator's
            # value): apply the failure mode, then give the remaining checks
            # one pass over this final output.
            return self._exhausted(
                block, unit, group_rows, decl, outcome, remaining, value, decision,
                response, source_text, base_prompt, attempt_idx, annotation,
            )

    def _exhausted(
        self, block, unit, group_rows, decl, outcome, remaining, value, decision,
        response, source_text, base_prompt, attempt_idx, annotation,
    ) -> _UnitOutcome:
        op = block.op
        out_attr = generated_attr(op)
        if decl.failure_mode == FailureMode.ABORT:
            raise AbortRun(decl.constraint_id, outcome.feedback)
        if decl.failure_mode == FailureMode.IGNORE:
            self.dropped_values.append(dict(unit.values))
            return _UnitOutcome(_IGNORED)

        flags = {decl.constraint_id}
        merged = dict(unit.values)
        if out_attr is not None:
            merged[out_attr] = value
        for a in remaining:
            impl = self._impl_for(a.decl)
            extra, spent = self._checked(
                lambda: self._run_reactive_check(
                    a.decl, impl, block, RowTuple("", merged, set(), ()),
                    response, source_text, base_prompt, decision=decision,
                )
            )
            self._record_check(
                a.decl, impl.mode, impl.mechanism, op.alias, unit.tuple_id or "(group)",
                attempt_idx, extra, merged.get(a.decl.target, value), source_text, annotation,
                cost=spent,
            )
            if extra.ok:
                continue
            if a.decl.failure_mode == FailureMode.ABORT:
                raise AbortRun(a.decl.constraint_id, extra.feedback)
            if a.decl.failure_mode == FailureMode.IGNORE:
                self.dropped_values.append(dict(unit.values))
                return _UnitOutcome(_IGNORED)
            flags.add(a.decl.constraint_id)

        if isinstance(op, Where) and decision is None:
            decision = True  # CONTINUE propagates the flagged tuple downstream
        return self._emit(block, unit, group_rows, value, decision, flags)

    def _emit(self, block: Block, unit: RowTuple, group_rows, value, decision, flags: set) -> _UnitOutcome:
        op = block.op
        if isinstance(op, Where):
            if decision is not True:
                return _UnitOutcome(_FILTERED)
            row = replace(unit, flags=unit.flags | flags)
            return _UnitOutcome(_KEEP, row)
        attr = generated_attr(op)
        values = dict(unit.values)
        values[attr] = value
        row = RowTuple(
            tuple_id=self._new_tuple_id(),
            values=values,
            flags=unit.flags | flags,
            parents=unit.parents if isinstance(op, Aggregate) else (unit.tuple_id,),
        )
        self._record_lineage(row.tuple_id, row.parents, op.alias)
        return _UnitOutcome(_KEEP, row)

    # -- model plumbing -----------------------------------------------------------

    def _invoke_model(self, request: ModelRequest, masks) -> ModelResponse:
        client = self.ctx.client
        if client is None:
            raise EngineError("no model client configured")
        call = client.complete_constrained if masks else client.complete
        try:
            return call(request)
        except ModelError:
            try:
                return call(request)  # transport errors get a single retry
            except ModelError as exc:
                raise EngineError(f"model failure after retry: {exc}") from exc

    def _render_values(self, op: Stage, unit: RowTuple, group_rows) -> dict:
        if isinstance(op, Aggregate):
            values = dict(unit.values)
            sep = self.ctx.config.record_separator
            for name in op.prompt.placeholders:
                if name not in values:
                    values[name] = sep.join("" if r.values.get(name) is None else str(r.values[name]) for r in group_rows)
            return values
        return dict(unit.values)

    def _source_text(self, prompt: PromptTemplate, render_values: dict) -> str:
        seen = []
        for name in prompt.placeholders:
            if name not in seen:
                seen.append(name)
        return "\n\n".join("" if render_values.get(n) is None else str(render_values[n]) for n in seen)

    def _out_type(self, op: Stage) -> ValueType | None:
        if isinstance(op, (Extend, Aggregate)):
            return op.out_type or ValueType.STRING
        if isinstance(op, SetStage):
            declared = dict(op.output_schema).get(op.attr)
            return declared or ValueType.STRING
        return ValueType.BOOL  # filters

    def _feedback(
        self,
        op_alias: str,
        base_prompt: str,
        decl: ConstraintDecl,
        annotation: OpAnnotation,
        output_text: str,
        outcome: CheckOutcome,
    ) -> str:
        text = FEEDBACK_TEMPLATE.format(
            output=output_text,
            constraint=describe_constraint(decl, annotation),
            reason=outcome.feedback,
        )
        exemplars = self.ctx.cache.lookup(op_alias, base_prompt, self.ctx.config.fewshot_k)
        if exemplars:
            lines = ["\n\nExamples of valid outputs for similar inputs:"]
            for prompt_excerpt, output in exemplars:
                lines.append(f"\nInput: {prompt_excerpt}\nOutput: {output}")
            text += "".join(lines)
        return text

    def _parse_output(self, op, response: ModelResponse, out_type, needs_cot) -> tuple[object, CheckOutcome]:
        mech = "deterministic"
        if needs_cot:
            if response.cot is None or response.answer is None:
                return None, CheckOutcome(
                    VIOLATION, 1.0,
                    "response is missing the PREMISES/STEPS/ANSWER reasoning block", mech,
                )
            raw = response.answer
        else:
            raw = response.text
        if isinstance(op, Where):
            decision = parse_bool(raw)
            if decision is None:
                return None, CheckOutcome(
                    VIOLATION, 1.0, f"filter output {raw!r} is not a boolean", mech
                )
            return decision, CheckOutcome(PASS, 1.0, "", mech)
        value = coerce_to_type(raw, out_type)
        if value is None and out_type not in (None, ValueType.STRING):
            return None, CheckOutcome(
                VIOLATION, 1.0, f"output {raw!r} does not parse as {out_type.value}", mech
            )
        return value, CheckOutcome(PASS, 1.0, "", mech)

    def _synthetic_type_decl(self, op, out_type) -> ConstraintDecl:
        from sicql.lang.ast import TypeSpec

        return ConstraintDecl(
            constraint_id=f"{op.alias}.type",
            target=op.alias,
            cclass=ConstraintClass.DOMAIN,
            domain=TypeSpec(out_type or ValueType.STRING),
            retry_threshold=self.ctx.config.default_retry,
            failure_mode=self.ctx.config.default_failure_mode,
            origin="implicit-type",
        )

    def _impl_for(self, decl: ConstraintDecl) -> ImplCandidate:
        impl = self.choices.get(decl.constraint_id)
        if impl is None:
            raise EngineError(f"physical plan has no implementation for '{decl.constraint_id}'")
        return impl

    def _build_mask(self, decl: ConstraintDecl, source_text: str):
        if decl.cclass == ConstraintClass.GROUNDED:
            return build_suffix_automaton(source_text)
        pattern = domain_regex(decl.domain)
        if pattern is None:
            raise EngineError(f"constraint '{decl.constraint_id}' has no automaton encoding")
        if decl.constraint_id not in self._dfa_cache:
            self._dfa_cache[decl.constraint_id] = regex_to_dfa(pattern)
        return self._dfa_cache[decl.constraint_id]

    def _build_guard(self, stream_decls: list[ConstraintDecl], source_text: str) -> StreamGuard | None:
        if not stream_decls:
            return None
        judge = self._judge
        costs: list[float] = []

        def checker(partial: str):
            before = self.total_cost
            outcome = check_grounding_abstractive(partial, source_text, judge)
            costs.append(self.total_cost - before)
            return outcome

        guard = StreamGuard(checker=checker, on_violation="backtrack")
        guard.check_costs = costs
        return guard

    # -- reactive check dispatch ----------------------------------------------------

    def _run_reactive_check(
        self,
        decl: ConstraintDecl,
        impl: ImplCandidate,
        block: Block,
        row: RowTuple,
        response: ModelResponse | None,
        source_text: str | None,
        base_prompt: str | None,
        decision=None,
    ) -> CheckOutcome:
        op = block.op
        own = decl.target in {t for t in (generated_attr(op), op.alias) if t}
        annotation, placeholders, producer_prompt = self._producer_info.get(
            decl.constraint_id, (getattr(op, "annotation", OpAnnotation.NONE), (), ""),
        )
        if not own or source_text is None:
            # Checked away from the producing operator: rebuild its input
            # rendering from the tuple's attribute values.
            source_text = "\n\n".join(
                "" if row.values.get(n) is None else str(row.values[n]) for n in placeholders
            )
            base_prompt = producer_prompt
        target_value = row.values.get(decl.target)
        c = decl.cclass
        if c == ConstraintClass.DOMAIN:
            return check_domain(target_value, decl.domain)
        if c == ConstraintClass.ASSERTION:
            return eval_assertion(decl.expr, row.values, self.ctx.current_date)
        if c in (ConstraintClass.INCLUDE, ConstraintClass.EXCLUDE):
            mode = "include" if c == ConstraintClass.INCLUDE else "exclude"
            return check_ie(target_value, decl.matcher, mode, judge=self._judge)
        if c == ConstraintClass.GROUNDED:
            if annotation == OpAnnotation.EXTRACTIVE:
                return check_grounding_extractive(
                    target_value, source_text,
                    normalize_whitespace=self.ctx.config.normalize_grounding_whitespace,
                )
            return check_grounding_abstractive(target_value, source_text, self._judge)
        if c == ConstraintClass.SOUND:
            cot = response.cot if response is not None else None
            result = decision if decision is not None else target_value
            return check_soundness(source_text or "", cot, result, self._judge)
        # RELEVANT
        return check_relevance(base_prompt or "", source_text or "", target_value, self._judge)

    # -- failure modes (deterministic path) ----------------------------------------

    def _apply_failure_mode(self, decl: ConstraintDecl, outcome: CheckOutcome, row: RowTuple):
        if decl.failure_mode == FailureMode.ABORT:
            raise AbortRun(decl.constraint_id, outcome.feedback)
        if decl.failure_mode == FailureMode.IGNORE:
            self.dropped_values.append(dict(row.values))
            return _UnitOutcome(_IGNORED)
        row.flags.add(decl.constraint_id)
        return None  # CONTINUE: keep checking


def execute(plan: PhysicalPlan, datasets: dict, ctx: RunContext) -> RunResult:
    """Run a physical plan over the named datasets."""
    return Executor(plan, ctx).run(datasets)
