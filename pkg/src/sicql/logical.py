"""Logical plan rewrites for constraint enforcement.

Rewrites run in a fixed pipeline: pushdown moves every assert next to the
stage producing its target, grounding-lineage expansion inserts checks along
derivation chains, default relevance attaches judge checks to generated
attributes, stats-driven reordering minimizes expected short-circuit cost,
and prompt injection appends constraint text to operator prompts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from sicql.errors import PlanError
from sicql.lang.ast import (
    AssertStage,
    ConstraintClass,
    ConstraintDecl,
    FailureMode,
    LogicalPlan,
    OpAnnotation,
    PromptTemplate,
    Scan,
    Stage,
    TypeSpec,
    ValueType,
    assign_constraint_ids,
    expr_attrs,
    generated_attr,
    is_semantic,
    referenced_attrs,
    stage_prompt,
)
from sicql.lang.formatter import describe_constraint

DEFAULT_CHECK_COST = 1.0
DEFAULT_SELECTIVITY = 0.9

_INJECT_MARKER = "\n\nConstraints:"


@dataclass(frozen=True)
class ConstraintStats:
    constraint_id: str
    cost: float
    selectivity: float

    def __post_init__(self):
        if self.cost < 0:
            raise ValueError(f"cost must be non-negative, got {self.cost}")
        if not 0.0 <= self.selectivity <= 1.0:
            raise ValueError(f"selectivity must be in [0, 1], got {self.selectivity}")


# ---------------------------------------------------------------------------
# Plan block utilities
# ---------------------------------------------------------------------------

@dataclass
class Block:
    """An operator stage plus the assert stages attached behind it."""

    op: Stage
    asserts: list[AssertStage]


def to_blocks(plan: LogicalPlan) -> list[Block]:
    blocks: list[Block] = []
    for st in plan.stages:
        if isinstance(st, AssertStage):
            if not blocks:
                raise PlanError("plan starts with an assert stage")
            blocks[-1].asserts.append(st)
        else:
            blocks.append(Block(op=st, asserts=[]))
    return blocks


def from_blocks(plan: LogicalPlan, blocks: list[Block]) -> LogicalPlan:
    stages: list[Stage] = []
    for block in blocks:
        stages.append(block.op)
        schema = block.op.output_schema
        for a in block.asserts:
            stages.append(replace(a, output_schema=schema))
    return plan.replace_stages(stages)


def producer_index(stages: tuple[Stage, ...] | list[Stage], target: str, before: int) -> int | None:
    """Index of the latest stage before ``before`` producing ``target``.

    Generating stages and operator aliases count; the scan produces every
    scanned column.
    """
    for j in range(before - 1, -1, -1):
        st = stages[j]
        if isinstance(st, AssertStage):
            continue
        if generated_attr(st) == target or st.alias == target:
            return j
        if isinstance(st, Scan) and any(name == target for name, _ in st.output_schema):
            return j
    return None


def validate_plan(plan: LogicalPlan) -> None:
    """Check that every stage only references its input schema."""
    prev_schema: set[str] = set()
    for i, st in enumerate(plan.stages):
        if isinstance(st, Scan):
            prev_schema = {name for name, _ in st.output_schema}
            continue
        refs = set(referenced_attrs(st))
        if isinstance(st, AssertStage):
            decl = st.decl
            if decl.expr is not None:
                refs |= set(expr_attrs(decl.expr))
            if decl.cclass != ConstraintClass.SOUND:
                refs.add(decl.target)
        missing = refs - prev_schema
        if missing:
            raise PlanError(f"stage {i} references unknown attributes: {sorted(missing)}")
        prev_schema = {name for name, _ in st.output_schema}


# ---------------------------------------------------------------------------
# Rewrites
# ---------------------------------------------------------------------------

def pushdown_constraints(plan: LogicalPlan) -> LogicalPlan:
    """Move every assert immediately after the stage producing its target."""
    stages = plan.stages
    anchored: dict[int, list[AssertStage]] = {}
    for i, st in enumerate(stages):
        if not isinstance(st, AssertStage):
            continue
        target = st.decl.target
        anchor = producer_index(stages, target, i)
        if anchor is None:
            raise PlanError(
                f"constraint {st.decl.constraint_id or st.decl.cclass.value} targets "
                f"'{target}' which is never produced"
            )
        anchored.setdefault(anchor, []).append(st)

    out: list[Stage] = []
    for i, st in enumerate(stages):
        if isinstance(st, AssertStage):
            continue
        out.append(st)
        for a in anchored.get(i, ()):
            out.append(replace(a, output_schema=st.output_schema))
    return plan.replace_stages(out)


def expand_grounding_lineage(plan: LogicalPlan) -> LogicalPlan:
    """Insert grounding checks along the derivation chain of grounded attrs.

    For each grounded attribute, every semantic generating stage between the
    source columns and the attribute gains a grounding check comparing that
    operator's own input and output. Requires pushdown to have run.
    """
    blocks = to_blocks(plan)
    ops = [b.op for b in blocks]

    def producer_block(attr: str, before: int) -> int | None:
        for j in range(before - 1, -1, -1):
            if generated_attr(ops[j]) == attr:
                return j
        return None

    # (block index, attr) pairs that need a grounding check.
    needed: list[tuple[int, str, ConstraintDecl]] = []
    seen: set[tuple[int, str]] = set()

    for bi, block in enumerate(blocks):
        for a in block.asserts:
            if a.decl.cclass != ConstraintClass.GROUNDED:
                continue
            # Walk ancestors of the grounded attribute, starting from the
            # inputs of its own generating stage. A frontier entry is
            # (attribute, exclusive search bound): an input of block k was
            # produced strictly before k, which also breaks SET self-cycles.
            pj_target = producer_block(a.decl.target, bi + 1)
            if pj_target is None:
                continue
            frontier = [(attr, pj_target) for attr in _op_inputs(ops[pj_target])]
            visited: set[tuple[int, str]] = set()
            while frontier:
                attr, limit = frontier.pop()
                pj = producer_block(attr, limit)
                if pj is None:
                    continue  # scanned source column
                if (pj, attr) in visited:
                    continue
                visited.add((pj, attr))
                producer = ops[pj]
                if is_semantic(producer):
                    key = (pj, attr)
                    if key not in seen:
                        seen.add(key)
                        needed.append((pj, attr, a.decl))
                frontier.extend((up, pj) for up in _op_inputs(producer))

    if not needed:
        return from_blocks(plan, blocks)

    taken = {d.constraint_id for d in plan.all_constraints()}
    for pj, attr, origin_decl in needed:
        block = blocks[pj]
        if any(
            x.decl.cclass == ConstraintClass.GROUNDED and x.decl.target == attr
            for x in block.asserts
        ):
            continue
        annotation = getattr(block.op, "annotation", OpAnnotation.NONE)
        if annotation == OpAnnotation.NONE:
            raise PlanError(
                f"grounding lineage reaches '{attr}' whose generating operator has no "
                "EXTRACTIVE or ABSTRACTIVE annotation"
            )
        decl = ConstraintDecl(
            constraint_id="",
            target=attr,
            cclass=ConstraintClass.GROUNDED,
            retry_threshold=origin_decl.retry_threshold,
            failure_mode=origin_decl.failure_mode,
            origin="lineage",
        )
        decl = assign_constraint_ids([decl], taken)[0]
        taken.add(decl.constraint_id)
        block.asserts.append(AssertStage(decl=decl))
    return from_blocks(plan, blocks)


def _op_inputs(stage: Stage) -> tuple[str, ...]:
    prompt = stage_prompt(stage)
    if prompt is not None:
        return prompt.placeholders
    return referenced_attrs(stage)


def attach_default_relevance(
    plan: LogicalPlan,
    enabled: bool,
    default_retry: int = 1,
    default_mode: FailureMode = FailureMode.CONTINUE,
) -> LogicalPlan:
    """Give every prompt-generated attribute a relevance check by default."""
    if not enabled:
        return plan
    blocks = to_blocks(plan)
    covered = {
        d.target for d in plan.all_constraints() if d.cclass == ConstraintClass.RELEVANT
    }
    taken = {d.constraint_id for d in plan.all_constraints()}
    for block in blocks:
        attr = generated_attr(block.op)
        if attr is None or not is_semantic(block.op) or attr in covered:
            continue
        decl = ConstraintDecl(
            constraint_id="",
            target=attr,
            cclass=ConstraintClass.RELEVANT,
            retry_threshold=default_retry,
            failure_mode=default_mode,
            origin="default-relevance",
        )
        decl = assign_constraint_ids([decl], taken)[0]
        taken.add(decl.constraint_id)
        block.asserts.append(AssertStage(decl=decl))
        covered.add(attr)
    return from_blocks(plan, blocks)


def inject_constraint_prompts(plan: LogicalPlan) -> LogicalPlan:
    """Append each operator's attached constraint text to its prompt."""
    blocks = to_blocks(plan)
    for block in blocks:
        prompt = stage_prompt(block.op)
        if prompt is None:
            continue
        if any(isinstance(s, str) and _INJECT_MARKER in s for s in prompt.segments):
            continue
        annotation = getattr(block.op, "annotation", OpAnnotation.NONE)
        texts = []
        implicit = getattr(block.op, "implicit_constraint", None)
        if implicit is not None and isinstance(implicit.domain, TypeSpec):
            if implicit.domain.vtype != ValueType.STRING:
                texts.append(describe_constraint(implicit, annotation))
        texts.extend(describe_constraint(a.decl, annotation) for a in block.asserts)
        if not texts:
            continue
        section = _INJECT_MARKER + "".join(f"\n- {t}" for t in texts)
        block.op = _replace_prompt(block.op, prompt.append_text(section))
    return from_blocks(plan, blocks)


def _replace_prompt(stage: Stage, prompt: PromptTemplate) -> Stage:
    if hasattr(stage, "source"):
        return replace(stage, source=prompt)
    if hasattr(stage, "predicate"):
        return replace(stage, predicate=prompt)
    return replace(stage, prompt=prompt)


def reorder_constraints(
    plan: LogicalPlan,
    stats: dict[str, ConstraintStats] | None = None,
    default_cost: float = DEFAULT_CHECK_COST,
    default_selectivity: float = DEFAULT_SELECTIVITY,
) -> LogicalPlan:
    """Sort each operator's checks ascending by cost / (1 - selectivity).

    This rank order minimizes expected detection cost under short-circuit
    checking; ties keep declaration order.
    """
    stats = stats or {}
    blocks = to_blocks(plan)

    def rank(a: AssertStage) -> float:
        s = stats.get(a.decl.constraint_id)
        cost = s.cost if s else default_cost
        sel = s.selectivity if s else default_selectivity
        if sel >= 1.0:
            return math.inf
        return cost / (1.0 - sel)

    for block in blocks:
        block.asserts.sort(key=rank)  # sort() is stable
    return from_blocks(plan, blocks)


def expected_check_cost(order: list[ConstraintStats]) -> float:
    """Expected short-circuit cost of checking constraints in this order."""
    total, reach = 0.0, 1.0
    for s in order:
        total += reach * s.cost
        reach *= s.selectivity
    return total


def optimize_logical(
    plan: LogicalPlan,
    stats: dict[str, ConstraintStats] | None = None,
    enable_relevance: bool = False,
    default_retry: int = 1,
    default_mode: FailureMode = FailureMode.CONTINUE,
) -> LogicalPlan:
    """Run the full rewrite pipeline in its canonical order."""
    plan = pushdown_constraints(plan)
    plan = expand_grounding_lineage(plan)
    plan = attach_default_relevance(plan, enable_relevance, default_retry, default_mode)
    plan = reorder_constraints(plan, stats)
    plan = inject_constraint_prompts(plan)
    return plan
