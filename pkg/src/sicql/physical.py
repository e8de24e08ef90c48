"""Physical planning: enforcement implementation choice under cost/reliability.

Every constraint gets one implementation (reactive check, decode-time token
mask, or per-segment stream check). The optimizer estimates expected plan
cost including retries and picks the cheapest assignment that satisfies the
user's precision/recall (or confidence-proxy) thresholds. Deterministic
implementations are perfectly reliable and always pass the reliability bar.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from sicql.errors import (
    ConfigError,
    EstimationError,
    InfeasiblePlanError,
    PlanError,
    RegexSupportError,
)
from sicql.lang.ast import (
    AssertStage,
    ConstraintClass,
    ConstraintDecl,
    LogicalPlan,
    OpAnnotation,
    PromptMatcher,
    TypeSpec,
)
from sicql.logical import Block, to_blocks
from sicql.checkers import domain_regex

MODE_REACTIVE = "reactive"
MODE_MASK = "proactive-mask"
MODE_STREAM = "proactive-stream"

MECH_DETERMINISTIC = "deterministic"
MECH_MODEL = "model"

DEFAULT_DET_COST = 0.1
DEFAULT_MASK_COST = 0.05
DEFAULT_MODEL_COST = 1.0
DEFAULT_MODEL_PRECISION = 0.9
DEFAULT_MODEL_RECALL = 0.9
DEFAULT_SEMANTIC_OP_COST = 1.0
DEFAULT_SELECTIVITY = 0.9

EXHAUSTIVE_LIMIT = 10_000


@dataclass
class ImplCandidate:
    constraint_id: str
    mode: str  # reactive | proactive-mask | proactive-stream
    mechanism: str  # deterministic | model
    detail: str  # deterministic kind or judge name
    est_cost: float
    precision: float = 1.0
    recall: float = 1.0
    confidence_capable: bool = True
    expected_confidence: float | None = None

    def __post_init__(self):
        if self.mechanism == MECH_DETERMINISTIC:
            # Deterministic checks are completely reliable by definition.
            self.precision = 1.0
            self.recall = 1.0
            self.confidence_capable = True
            self.expected_confidence = 1.0

    @property
    def deterministic(self) -> bool:
        return self.mechanism == MECH_DETERMINISTIC

    def explain_tags(self) -> str:
        det = "[deterministic]" if self.deterministic else f"[stochastic:{self.detail}]"
        mode = "[reactive]" if self.mode == MODE_REACTIVE else "[proactive]"
        return f"{det} {mode} [mode={self.mode}] [cost={self.est_cost:.2f}]"


@dataclass(frozen=True)
class Capabilities:
    judges: tuple[str, ...] = ()
    token_mask: bool = False
    stream_checks: bool = False
    decode_allowlist: frozenset[str] = frozenset({"domain-regex", "grounding-extractive"})


@dataclass(frozen=True)
class Thresholds:
    max_plan_cost: float | None = None
    min_precision: float | dict[str, float] | None = None
    min_recall: float | dict[str, float] | None = None
    min_confidence: float | None = None

    def precision_floor(self, cid: str) -> float | None:
        return _floor(self.min_precision, cid)

    def recall_floor(self, cid: str) -> float | None:
        return _floor(self.min_recall, cid)

    @property
    def proxy_mode(self) -> bool:
        return self.min_confidence is not None


def _floor(spec, cid: str) -> float | None:
    if spec is None:
        return None
    if isinstance(spec, dict):
        if cid in spec:
            return spec[cid]
        return spec.get("*")
    return spec


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

@dataclass
class OperatorProfile:
    cost: float | None = None
    cardinality_factor: float = 1.0


@dataclass
class ConstraintProfile:
    candidates: list[dict] = field(default_factory=list)
    violation_prob: float | None = None
    selectivity: float | None = None

    def selectivity_value(self, default: float = DEFAULT_SELECTIVITY) -> float:
        if self.selectivity is not None:
            return self.selectivity
        if self.violation_prob is not None:
            return 1.0 - self.violation_prob
        return default

    def violation_value(self, default: float = 1.0 - DEFAULT_SELECTIVITY) -> float:
        if self.violation_prob is not None:
            return self.violation_prob
        if self.selectivity is not None:
            return 1.0 - self.selectivity
        return default

    def stats_for(self, mode: str, mechanism: str | None = None) -> dict | None:
        for cand in self.candidates:
            if cand.get("mode") != mode:
                continue
            if mechanism and cand.get("mechanism") and cand["mechanism"] != mechanism:
                continue
            return cand
        return None


_PROFILE_KEYS = {"operators", "constraints", "thresholds", "base_cardinality"}
_THRESHOLD_KEYS = {"max_plan_cost", "min_precision", "min_recall", "min_confidence"}


@dataclass
class Profile:
    operators: dict[str, OperatorProfile] = field(default_factory=dict)
    constraints: dict[str, ConstraintProfile] = field(default_factory=dict)
    thresholds: Thresholds = field(default_factory=Thresholds)
    base_cardinality: float = 1.0

    @classmethod
    def from_dict(cls, data: dict) -> "Profile":
        unknown = set(data) - _PROFILE_KEYS
        if unknown:
            raise ConfigError(f"unknown profile keys: {sorted(unknown)}")
        ops = {
            alias: OperatorProfile(
                cost=entry.get("cost"),
                cardinality_factor=entry.get("cardinality_factor", 1.0),
            )
            for alias, entry in data.get("operators", {}).items()
        }
        cons = {}
        for cid, entry in data.get("constraints", {}).items():
            cons[cid] = ConstraintProfile(
                candidates=list(entry.get("candidates", [])),
                violation_prob=entry.get("violation_prob"),
                selectivity=entry.get("selectivity"),
            )
        tdata = data.get("thresholds", {})
        unknown = set(tdata) - _THRESHOLD_KEYS
        if unknown:
            raise ConfigError(f"unknown threshold keys: {sorted(unknown)}")
        thresholds = Thresholds(
            max_plan_cost=tdata.get("max_plan_cost"),
            min_precision=tdata.get("min_precision"),
            min_recall=tdata.get("min_recall"),
            min_confidence=tdata.get("min_confidence"),
        )
        return cls(
            operators=ops,
            constraints=cons,
            thresholds=thresholds,
            base_cardinality=data.get("base_cardinality", 1.0),
        )

    @classmethod
    def load(cls, path: str) -> "Profile":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Implementation enumeration
# ---------------------------------------------------------------------------

def enumerate_impls(
    decl: ConstraintDecl,
    capabilities: Capabilities,
    annotation: OpAnnotation = OpAnnotation.NONE,
    profile: Profile | None = None,
) -> list[ImplCandidate]:
    """All feasible enforcement implementations for one constraint."""
    cid = decl.constraint_id
    judge = capabilities.judges[0] if capabilities.judges else None
    out: list[ImplCandidate] = []

    def det(mode: str, kind: str, cost: float) -> ImplCandidate:
        return ImplCandidate(cid, mode, MECH_DETERMINISTIC, kind, cost)

    def model(mode: str, cost: float) -> ImplCandidate:
        return ImplCandidate(
            cid, mode, MECH_MODEL, judge or "judge", cost,
            precision=DEFAULT_MODEL_PRECISION, recall=DEFAULT_MODEL_RECALL,
            confidence_capable=True, expected_confidence=None,
        )

    c = decl.cclass
    if c == ConstraintClass.DOMAIN:
        out.append(det(MODE_REACTIVE, "domain", DEFAULT_DET_COST))
        if (
            capabilities.token_mask
            and "domain-regex" in capabilities.decode_allowlist
            and decl.domain is not None
            and not isinstance(decl.domain, TypeSpec)
            and _maskable(decl.domain)
        ):
            out.append(det(MODE_MASK, "regex-dfa", DEFAULT_MASK_COST))
    elif c in (ConstraintClass.INCLUDE, ConstraintClass.EXCLUDE):
        if isinstance(decl.matcher, PromptMatcher):
            if judge is not None:
                out.append(model(MODE_REACTIVE, DEFAULT_MODEL_COST))
        else:
            out.append(det(MODE_REACTIVE, "matcher", DEFAULT_DET_COST))
    elif c == ConstraintClass.GROUNDED:
        if annotation == OpAnnotation.EXTRACTIVE:
            out.append(det(MODE_REACTIVE, "substring", DEFAULT_DET_COST))
            if capabilities.token_mask and "grounding-extractive" in capabilities.decode_allowlist:
                out.append(det(MODE_MASK, "suffix-automaton", DEFAULT_MASK_COST))
        elif annotation == OpAnnotation.ABSTRACTIVE:
            if judge is not None:
                out.append(model(MODE_REACTIVE, DEFAULT_MODEL_COST))
                if capabilities.stream_checks:
                    out.append(model(MODE_STREAM, DEFAULT_MODEL_COST))
        else:
            raise PlanError(
                f"grounding constraint {cid} targets an operator without an "
                "EXTRACTIVE or ABSTRACTIVE annotation"
            )
    elif c in (ConstraintClass.SOUND, ConstraintClass.RELEVANT):
        if judge is not None:
            out.append(model(MODE_REACTIVE, DEFAULT_MODEL_COST))
    else:  # ASSERTION
        out.append(det(MODE_REACTIVE, "expression", DEFAULT_DET_COST))

    if not out:
        raise PlanError(
            f"no enforcement implementation available for {cid or c.value} "
            "(model-backed class with no judge configured)"
        )
    return _apply_profile(out, profile)


def _maskable(spec) -> bool:
    """A domain spec is maskable when its automaton encoding compiles."""
    pattern = domain_regex(spec)
    if pattern is None:
        return False
    try:
        from sicql.automata.regex_dfa import regex_to_dfa

        regex_to_dfa(pattern)
    except RegexSupportError:
        return False
    return True


def _apply_profile(candidates: list[ImplCandidate], profile: Profile | None) -> list[ImplCandidate]:
    if profile is None:
        return candidates
    for cand in candidates:
        entry = profile.constraints.get(cand.constraint_id)
        if entry is None:
            continue
        stats = entry.stats_for(cand.mode, cand.mechanism)
        if stats is None:
            continue
        if "cost" in stats:
            cand.est_cost = float(stats["cost"])
        if not cand.deterministic:
            if "precision" in stats:
                cand.precision = float(stats["precision"])
            if "recall" in stats:
                cand.recall = float(stats["recall"])
            if "confidence" in stats:
                cand.expected_confidence = float(stats["confidence"])
    return candidates


# ---------------------------------------------------------------------------
# Cost model
# ---------------------------------------------------------------------------

def expected_attempts(violation_prob: float, retry_threshold: int) -> float:
    """Expected operator invocations: sum of v^k for k in 0..r."""
    if not 0.0 <= violation_prob <= 1.0:
        raise ValueError(f"violation probability must be in [0, 1], got {violation_prob}")
    if retry_threshold < 0:
        raise ValueError(f"retry threshold must be non-negative, got {retry_threshold}")
    if violation_prob == 1.0:
        return float(retry_threshold + 1)
    return (1.0 - violation_prob ** (retry_threshold + 1)) / (1.0 - violation_prob)


@dataclass
class ConstraintEstimate:
    impl: ImplCandidate
    expected_checks: float
    expected_retries: float


@dataclass
class PlanEstimate:
    expected_cost: float
    per_constraint: dict[str, ConstraintEstimate]
    operator_reliability: dict[str, float]
    per_stage: dict[str, float]


@dataclass
class PhysicalPlan:
    logical: LogicalPlan
    choices: dict[str, ImplCandidate]
    estimate: PlanEstimate
    search_strategy: str = "exhaustive"
    warnings: list[str] = field(default_factory=list)


def _constraint_stats(profile: Profile, cid: str, strict: bool) -> ConstraintProfile:
    entry = profile.constraints.get(cid)
    if entry is None:
        if strict:
            raise EstimationError(f"missing profile entry for constraint '{cid}'")
        return ConstraintProfile()
    return entry


def estimate_plan(
    plan: LogicalPlan,
    choices: dict[str, ImplCandidate],
    profile: Profile,
    strict: bool = True,
) -> PlanEstimate:
    """Expected cost with retries plus post-retry operator reliability.

    Per stage: ``(op cost + proactive overhead + ordered short-circuit check
    cost) x expected attempts x input cardinality``. Per-attempt violation
    probabilities of a stage's constraints combine independently; constraints
    enforced proactively cannot be violated and contribute none.
    """
    from sicql.lang.ast import is_semantic  # local import to avoid cycle noise

    total = 0.0
    per_stage: dict[str, float] = {}
    reliability: dict[str, float] = {}
    per_constraint: dict[str, ConstraintEstimate] = {}
    card = profile.base_cardinality

    for block in to_blocks(plan):
        alias = block.op.alias or f"stage_{len(per_stage)}"
        opp = profile.operators.get(alias, OperatorProfile())
        if opp.cost is not None:
            op_cost = opp.cost
        else:
            op_cost = DEFAULT_SEMANTIC_OP_COST if is_semantic(block.op) else 0.0

        reactive: list[tuple[AssertStage, ImplCandidate]] = []
        proactive_cost = 0.0
        op_reliability = 1.0
        retry_cap = 0
        for a in block.asserts:
            cid = a.decl.constraint_id
            impl = choices.get(cid)
            if impl is None:
                raise EstimationError(f"no implementation chosen for constraint '{cid}'")
            retry_cap = max(retry_cap, a.decl.retry_threshold)
            if impl.mode == MODE_REACTIVE:
                reactive.append((a, impl))
            else:
                proactive_cost += impl.est_cost
                per_constraint[cid] = ConstraintEstimate(impl, expected_checks=card, expected_retries=0.0)

        chain_cost = 0.0
        reach = 1.0
        combined_pass = 1.0
        for a, impl in reactive:
            stats = _constraint_stats(profile, a.decl.constraint_id, strict)
            sel = stats.selectivity_value()
            chain_cost += reach * impl.est_cost
            reach *= sel
            combined_pass *= 1.0 - stats.violation_value()

        v = 1.0 - combined_pass
        attempts = expected_attempts(v, retry_cap if reactive else 0)
        stage_cost = (op_cost + proactive_cost + chain_cost) * attempts * card

        reach = 1.0
        for a, impl in reactive:
            cid = a.decl.constraint_id
            stats = _constraint_stats(profile, cid, strict)
            vi = stats.violation_value()
            per_constraint[cid] = ConstraintEstimate(
                impl,
                expected_checks=attempts * reach * card,
                expected_retries=(expected_attempts(vi, a.decl.retry_threshold) - 1.0) * card,
            )
            reach *= stats.selectivity_value()
            if a.decl.failure_mode.value == "CONTINUE":
                op_reliability *= 1.0 - vi ** (a.decl.retry_threshold + 1)
            # IGNORE / ABORT leave only adherent tuples behind.

        total += stage_cost
        per_stage[alias] = stage_cost
        reliability[alias] = op_reliability
        card *= opp.cardinality_factor

    return PlanEstimate(
        expected_cost=total,
        per_constraint=per_constraint,
        operator_reliability=reliability,
        per_stage=per_stage,
    )


# ---------------------------------------------------------------------------
# Plan selection
# ---------------------------------------------------------------------------

def target_annotations(plan: LogicalPlan) -> dict[str, OpAnnotation]:
    """Annotation of each constraint target's producing stage.

    The mechanism of a grounding check is a property of the operator that
    generated the attribute, wherever the assert currently sits.
    """
    from sicql.logical import producer_index

    out: dict[str, OpAnnotation] = {}
    stages = plan.stages
    for i, st in enumerate(stages):
        if not isinstance(st, AssertStage):
            continue
        pj = producer_index(stages, st.decl.target, i)
        if pj is not None:
            out[st.decl.constraint_id] = getattr(stages[pj], "annotation", OpAnnotation.NONE)
    return out


def _feasible(cand: ImplCandidate, thresholds: Thresholds) -> tuple[bool, str | None]:
    if cand.deterministic:
        return True, None
    if thresholds.proxy_mode:
        if cand.expected_confidence is None or cand.expected_confidence < thresholds.min_confidence:
            return False, (
                f"min_confidence={thresholds.min_confidence} exceeds expected confidence "
                f"{cand.expected_confidence if cand.expected_confidence is not None else 'unknown'}"
            )
        return True, None
    floor = thresholds.precision_floor(cand.constraint_id)
    if floor is not None and cand.precision < floor:
        return False, f"min_precision={floor} exceeds precision {cand.precision}"
    floor = thresholds.recall_floor(cand.constraint_id)
    if floor is not None and cand.recall < floor:
        return False, f"min_recall={floor} exceeds recall {cand.recall}"
    return True, None


def select_plan(
    plan: LogicalPlan,
    profile: Profile | None = None,
    thresholds: Thresholds | None = None,
    capabilities: Capabilities | None = None,
) -> PhysicalPlan:
    """Pick the cheapest feasible implementation assignment.

    Exhaustive search when the assignment space is small enough, greedy
    per-constraint otherwise; the strategy is recorded for EXPLAIN.
    """
    profile = profile or Profile()
    thresholds = thresholds or profile.thresholds
    capabilities = capabilities or Capabilities(judges=("judge",), token_mask=True, stream_checks=True)

    blocks = to_blocks(plan)
    annotations = target_annotations(plan)
    ordered: list[tuple[str, list[ImplCandidate]]] = []
    for block in blocks:
        for a in block.asserts:
            annotation = annotations.get(a.decl.constraint_id, OpAnnotation.NONE)
            cands = enumerate_impls(a.decl, capabilities, annotation, profile)
            feasible = []
            reasons = []
            for cand in cands:
                ok, why = _feasible(cand, thresholds)
                if ok:
                    feasible.append(cand)
                elif why:
                    reasons.append(why)
            if not feasible:
                raise InfeasiblePlanError(
                    f"constraint {a.decl.constraint_id}: no feasible implementation "
                    f"({'; '.join(sorted(set(reasons))) or 'no candidates'})",
                    violated=sorted(set(reasons)),
                )
            ordered.append((a.decl.constraint_id, feasible))

    space = 1
    for _, cands in ordered:
        space *= len(cands)

    if space <= EXHAUSTIVE_LIMIT:
        strategy = "exhaustive"
        best: tuple[float, dict[str, ImplCandidate], PlanEstimate] | None = None
        for combo in itertools.product(*(cands for _, cands in ordered)):
            choices = {cid: cand for (cid, _), cand in zip(ordered, combo)}
            est = estimate_plan(plan, choices, profile, strict=False)
            if best is None or est.expected_cost < best[0] - 1e-12:
                best = (est.expected_cost, choices, est)
        if best is None:  # zero constraints
            est = estimate_plan(plan, {}, profile, strict=False)
            best = (est.expected_cost, {}, est)
        cost, choices, estimate = best
    else:
        strategy = "greedy"
        choices = {cid: min(cands, key=lambda c: c.est_cost) for cid, cands in ordered}
        estimate = estimate_plan(plan, choices, profile, strict=False)
        cost = estimate.expected_cost

    if thresholds.max_plan_cost is not None and cost > thresholds.max_plan_cost:
        raise InfeasiblePlanError(
            f"max_plan_cost={thresholds.max_plan_cost} exceeded: cheapest feasible plan "
            f"costs {cost:.4f}",
            violated=[f"max_plan_cost={thresholds.max_plan_cost}"],
        )
    return PhysicalPlan(logical=plan, choices=choices, estimate=estimate, search_strategy=strategy)
