"""Organization-wide constraint registry.

Constraints are stored as parseable ASSERT bodies with descriptions and
tags in a single JSONL file. Recommendation embeds the query and each
description with a deterministic hashed bag-of-words and ranks by cosine
similarity, optionally reranked by a judge. Conflict detection is static
and advisory: disjoint value sets, empty regex intersections via product-DFA
emptiness, and include/exclude contradictions; prompt-based pairs can get an
optional judge pass. Conflicts warn, they never block execution.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from sicql.automata.regex_dfa import product_intersection_empty, regex_to_dfa
from sicql.embedding import cosine, hash_embed
from sicql.errors import RegexSupportError, StoreError
from sicql.lang.ast import (
    ConstraintClass,
    ConstraintDecl,
    LiteralMatcher,
    PromptMatcher,
    RegexSpec,
    ValueSetSpec,
)
from sicql.lang.formatter import render_pred
from sicql.lang.parser import parse_constraint_pred


@dataclass
class StoredConstraint:
    constraint_id: str
    decl_text: str  # ASSERT body, reparseable
    description: str
    tags: tuple[str, ...] = ()
    provenance: str = ""  # source query / team note
    soft: bool = False
    usage_count: int = 0

    def decl(self) -> ConstraintDecl:
        return parse_constraint_pred(self.decl_text)

    def to_json(self) -> dict:
        return {
            "id": self.constraint_id,
            "decl": self.decl_text,
            "description": self.description,
            "tags": list(self.tags),
            "provenance": self.provenance,
            "soft": self.soft,
            "usage_count": self.usage_count,
        }

    @classmethod
    def from_json(cls, data: dict) -> "StoredConstraint":
        return cls(
            constraint_id=data["id"],
            decl_text=data["decl"],
            description=data.get("description", ""),
            tags=tuple(data.get("tags", ())),
            provenance=data.get("provenance", ""),
            soft=data.get("soft", False),
            usage_count=data.get("usage_count", 0),
        )


@dataclass(frozen=True)
class Conflict:
    first: str
    second: str
    kind: str  # disjoint-domain | empty-regex-intersection | include-exclude-contradiction | flagged-by-judge
    explanation: str

    def involves(self, constraint_id: str) -> bool:
        return constraint_id in (self.first, self.second)


class ConstraintStore:
    """JSONL-backed registry; concurrent reads, serialized writes."""

    def __init__(self, path: str | Path, embed_fn=None):
        self.path = Path(path)
        self.embed_fn = embed_fn or hash_embed
        self._lock = threading.Lock()
        self._items: dict[str, StoredConstraint] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    item = StoredConstraint.from_json(json.loads(line))
                    self._items[item.constraint_id] = item

    def _persist(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as fh:
            for item in self._items.values():
                fh.write(json.dumps(item.to_json(), sort_keys=True) + "\n")

    # -- registration -----------------------------------------------------------

    def register(
        self,
        constraint_id: str,
        decl_text: str,
        description: str,
        tags: tuple[str, ...] = (),
        provenance: str = "",
        soft: bool = False,
    ) -> str:
        parse_constraint_pred(decl_text)  # must be a valid declaration
        with self._lock:
            if constraint_id in self._items:
                raise StoreError(f"constraint id '{constraint_id}' already registered")
            self._items[constraint_id] = StoredConstraint(
                constraint_id=constraint_id,
                decl_text=decl_text,
                description=description,
                tags=tuple(tags),
                provenance=provenance,
                soft=soft,
            )
            self._persist()
        return constraint_id

    def lookup(self, constraint_id: str) -> StoredConstraint:
        item = self._items.get(constraint_id)
        if item is None:
            raise StoreError(f"unknown constraint id '{constraint_id}'")
        return item

    def all(self) -> list[StoredConstraint]:
        return list(self._items.values())

    def mark_used(self, constraint_id: str) -> None:
        """Bump the usage count when a recommendation is accepted."""
        with self._lock:
            item = self.lookup(constraint_id)
            item.usage_count += 1
            self._persist()

    # -- recommendation ------------------------------------------------------------

    def recommend(self, query_text: str, k: int, judge=None) -> list[tuple[StoredConstraint, float]]:
        """Top-k stored constraints by description similarity to the query.

        With a judge, the top 2k cosine candidates are reranked: items the
        judge deems applicable keep their score, others are demoted behind
        every applicable item. Deterministic given store contents and query.
        """
        if k <= 0:
            return []
        query_vec = self.embed_fn(query_text)
        scored = []
        for i, item in enumerate(self._items.values()):
            text = item.description or item.decl_text
            scored.append((-cosine(query_vec, self.embed_fn(text)), i, item))
        scored.sort(key=lambda t: (t[0], t[1]))
        candidates = scored[: 2 * k] if judge is not None else scored[:k]
        if judge is None:
            return [(item, -neg) for neg, _, item in candidates[:k]]
        reranked = []
        for neg, i, item in candidates:
            res = judge.judge(
                task=f"is this constraint applicable to the query: {query_text}",
                input_text=query_text,
                output=item.description or item.decl_text,
                mode="relevance",
            )
            penalty = 0.0 if res.verdict else 2.0  # demote inapplicable items
            reranked.append((penalty + neg, i, item, -neg))
        reranked.sort(key=lambda t: (t[0], t[1]))
        return [(item, score) for _, _, item, score in reranked[:k]]

    # -- conflicts ----------------------------------------------------------------

    def detect_conflicts(
        self, constraints: list[StoredConstraint] | None = None, judge=None
    ) -> list[Conflict]:
        items = constraints if constraints is not None else self.all()
        decls = []
        for item in items:
            decls.append((item, item.decl()))
        conflicts: list[Conflict] = []
        for i in range(len(decls)):
            for j in range(i + 1, len(decls)):
                conflict = check_pair(decls[i], decls[j], judge=judge)
                if conflict is not None:
                    conflicts.append(conflict)
        return conflicts


def check_pair(
    a: tuple[StoredConstraint, ConstraintDecl],
    b: tuple[StoredConstraint, ConstraintDecl],
    judge=None,
) -> Conflict | None:
    """Static pairwise conflict analysis for same-target constraints."""
    item_a, decl_a = a
    item_b, decl_b = b
    if decl_a.target != decl_b.target:
        return None

    def conflict(kind: str, explanation: str) -> Conflict:
        return Conflict(item_a.constraint_id, item_b.constraint_id, kind, explanation)

    if (
        decl_a.cclass == ConstraintClass.DOMAIN
        and decl_b.cclass == ConstraintClass.DOMAIN
        and isinstance(decl_a.domain, ValueSetSpec)
        and isinstance(decl_b.domain, ValueSetSpec)
    ):
        overlap = set(decl_a.domain.values) & set(decl_b.domain.values)
        if not overlap:
            return conflict(
                "disjoint-domain",
                f"value sets on '{decl_a.target}' share no member; every value fails one of them",
            )
    if (
        decl_a.cclass == ConstraintClass.DOMAIN
        and decl_b.cclass == ConstraintClass.DOMAIN
        and isinstance(decl_a.domain, RegexSpec)
        and isinstance(decl_b.domain, RegexSpec)
    ):
        try:
            empty, _ = product_intersection_empty(
                regex_to_dfa(decl_a.domain.pattern), regex_to_dfa(decl_b.domain.pattern)
            )
        except RegexSupportError:
            empty = False  # cannot decide statically; stay silent
        if empty:
            return conflict(
                "empty-regex-intersection",
                f"no string matches both {decl_a.domain.pattern!r} and {decl_b.domain.pattern!r}",
            )
    pair = _include_exclude(decl_a, decl_b)
    if pair is not None:
        inc, exc = pair
        if isinstance(inc.matcher, LiteralMatcher) and isinstance(exc.matcher, LiteralMatcher):
            if exc.matcher.text and exc.matcher.text in inc.matcher.text:
                return conflict(
                    "include-exclude-contradiction",
                    f"including '{inc.matcher.text}' forces the excluded '{exc.matcher.text}' to appear",
                )
    if judge is not None and _both_prompt_based(decl_a, decl_b):
        res = judge.judge(
            task="do these two constraints contradict each other",
            input_text=render_pred(decl_a),
            output=render_pred(decl_b),
            mode="semantic-match",
        )
        if res.verdict:
            return conflict("flagged-by-judge", f"judge flagged a contradiction: {res.rationale}")
    return None


def _include_exclude(a: ConstraintDecl, b: ConstraintDecl):
    if a.cclass == ConstraintClass.INCLUDE and b.cclass == ConstraintClass.EXCLUDE:
        return a, b
    if b.cclass == ConstraintClass.INCLUDE and a.cclass == ConstraintClass.EXCLUDE:
        return b, a
    return None


def _both_prompt_based(a: ConstraintDecl, b: ConstraintDecl) -> bool:
    return isinstance(a.matcher, PromptMatcher) and isinstance(b.matcher, PromptMatcher)
