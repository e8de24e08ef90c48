"""Constraint store: registration, recommendation, conflict detection."""

import random
import re

import pytest

from sicql.embedding import cosine, hash_embed
from sicql.errors import StoreError
from sicql.store import ConstraintStore, StoredConstraint, check_pair

from .regexgen import gen_pattern


@pytest.fixture
def store(tmp_path):
    return ConstraintStore(tmp_path / "store.jsonl")


def stored(cid, decl_text, description=""):
    return StoredConstraint(constraint_id=cid, decl_text=decl_text, description=description)


class TestRegistry:
    def test_register_and_lookup_round_trip(self, store, tmp_path):
        store.register(
            "pii-exclusion",
            "summary EXCLUDES p'personally identifiable information' RETRY 1 CONTINUE ON FAIL",
            description="hospital-wide PII exclusion for EHR summaries",
            tags=("pii", "ehr"),
        )
        reloaded = ConstraintStore(tmp_path / "store.jsonl")
        item = reloaded.lookup("pii-exclusion")
        assert item.tags == ("pii", "ehr")
        assert item.decl().cclass.value == "exclude"

    def test_duplicate_id_rejected(self, store):
        store.register("c1", "x EXCLUDES 'ssn'", "desc")
        with pytest.raises(StoreError, match="already registered"):
            store.register("c1", "x EXCLUDES 'mrn'", "other")

    def test_unknown_id(self, store):
        with pytest.raises(StoreError, match="unknown"):
            store.lookup("nope")

    def test_invalid_decl_rejected(self, store):
        from sicql.errors import ParseError

        with pytest.raises(ParseError):
            store.register("bad", "EXCLUDES EXCLUDES", "broken")

    def test_usage_count_increments(self, store):
        store.register("c1", "x EXCLUDES 'ssn'", "desc")
        store.mark_used("c1")
        store.mark_used("c1")
        assert store.lookup("c1").usage_count == 2


class TestEmbedding:
    def test_deterministic(self):
        assert hash_embed("patient EHR summary") == hash_embed("patient EHR summary")

    def test_disjoint_tokens_orthogonal(self):
        assert cosine(hash_embed("alpha beta"), hash_embed("gamma delta")) == pytest.approx(0.0)

    def test_order_free(self):
        a = hash_embed("patient EHR summary")
        b = hash_embed("EHR patient summary")
        assert cosine(a, b) == pytest.approx(1.0)


class TestRecommendation:
    def test_domain_relevant_item_ranks_first(self, store):
        store.register("pii-exclusion", "summary EXCLUDES p'PII'",
                       "exclude patient PII from EHR summaries")
        store.register("url-domain", "link INCLUDES r'^https://'",
                       "generated web links must be https URLs")
        ranked = store.recommend("summarize the patient EHR history", k=2)
        assert ranked[0][0].constraint_id == "pii-exclusion"
        assert ranked[0][1] > ranked[1][1]

    def test_k_zero_empty(self, store):
        store.register("c1", "x EXCLUDES 'a'", "something")
        assert store.recommend("anything", 0) == []

    def test_identical_text_maximal_similarity(self, store):
        store.register("c1", "x EXCLUDES 'a'", "exclude lab values from notes")
        ranked = store.recommend("exclude lab values from notes", k=1)
        assert ranked[0][1] == pytest.approx(1.0)

    def test_deterministic_ranking(self, store):
        for i in range(5):
            store.register(f"c{i}", "x EXCLUDES 'a'", f"description number {i} about topics")
        first = [item.constraint_id for item, _ in store.recommend("topics description", 5)]
        second = [item.constraint_id for item, _ in store.recommend("topics description", 5)]
        assert first == second

    def test_judge_rerank_demotes_inapplicable(self, store):
        from sicql.models import FakeModel, FakeModelScript

        store.register("good", "x EXCLUDES 'a'", "alpha topic coverage")
        store.register("bad", "y EXCLUDES 'b'", "alpha topic coverage duplicate")
        judge = FakeModel(
            FakeModelScript.from_dict(
                {"judge": {"rules": [
                    {"mode": "relevance", "pattern": "duplicate", "applies_to": "output", "verdict": False},
                    {"mode": "relevance", "verdict": True},
                ]}}
            ),
            seed=0,
        )
        ranked = store.recommend("alpha topic", k=2, judge=judge)
        assert ranked[0][0].constraint_id == "good"


class TestConflicts:
    def test_disjoint_value_sets(self, store):
        a = stored("c1", "dose IN ('mg', 'ml')")
        b = stored("c2", "dose IN ('kg')")
        conflicts = store.detect_conflicts([a, b])
        assert len(conflicts) == 1
        assert conflicts[0].kind == "disjoint-domain"

    def test_overlapping_value_sets_ok(self, store):
        a = stored("c1", "dose IN ('mg', 'ml')")
        b = stored("c2", "dose IN ('ml')")
        assert store.detect_conflicts([a, b]) == []

    def test_empty_regex_intersection(self, store):
        a = stored("c1", "REGEXP_CONTAINS(code, r'^a+$')")
        b = stored("c2", "REGEXP_CONTAINS(code, r'^b+$')")
        conflicts = store.detect_conflicts([a, b])
        assert [c.kind for c in conflicts] == ["empty-regex-intersection"]

    def test_include_exclude_contradiction(self, store):
        a = stored("c1", "note INCLUDES 'dose'")
        b = stored("c2", "note EXCLUDES 'dose'")
        conflicts = store.detect_conflicts([a, b])
        assert [c.kind for c in conflicts] == ["include-exclude-contradiction"]

    def test_exclude_substring_of_include(self, store):
        a = stored("c1", "note INCLUDES 'dosage chart'")
        b = stored("c2", "note EXCLUDES 'dosage'")
        assert store.detect_conflicts([a, b])[0].kind == "include-exclude-contradiction"

    def test_different_targets_never_conflict(self, store):
        a = stored("c1", "x IN ('a')")
        b = stored("c2", "y IN ('b')")
        assert store.detect_conflicts([a, b]) == []

    def test_symmetry(self, store):
        a = stored("c1", "dose IN ('mg')")
        b = stored("c2", "dose IN ('kg')")
        ab = store.detect_conflicts([a, b])[0]
        ba = store.detect_conflicts([b, a])[0]
        assert {ab.first, ab.second} == {ba.first, ba.second}
        assert ab.kind == ba.kind

    def test_identical_constraint_pair_no_conflict(self, store):
        a = stored("c1", "dose IN ('mg', 'ml')")
        b = stored("c2", "dose IN ('mg', 'ml')")
        assert store.detect_conflicts([a, b]) == []

    def test_judge_flags_prompt_pairs(self, store):
        from sicql.models import FakeModel, FakeModelScript

        a = stored("c1", "summary INCLUDES p'full clinical detail'")
        b = stored("c2", "summary EXCLUDES p'any identifying clinical facts'")
        judge = FakeModel(
            FakeModelScript.from_dict(
                {"judge": {"rules": [{"mode": "semantic-match", "verdict": True,
                                      "rationale": "details are identifying"}]}}
            ),
            seed=0,
        )
        conflicts = store.detect_conflicts([a, b], judge=judge)
        assert [c.kind for c in conflicts] == ["flagged-by-judge"]

    def test_product_dfa_agrees_with_bounded_enumeration(self, store):
        """Same oracle as the automata suite, driven through check_pair."""
        from itertools import product as iproduct

        from sicql.automata.regex_dfa import strict_end_pattern

        rng = random.Random(31415)
        alphabet = "ab-"
        checked = 0
        while checked < 100:
            p1 = gen_pattern(rng, alphabet="ab", escapes=False)
            p2 = gen_pattern(rng, alphabet="ab", escapes=False)
            a = stored("c1", f"REGEXP_CONTAINS(x, r'{p1}')")
            b = stored("c2", f"REGEXP_CONTAINS(x, r'{p2}')")
            conflict = check_pair((a, a.decl()), (b, b.decl()))
            flagged_empty = conflict is not None and conflict.kind == "empty-regex-intersection"
            r1, r2 = re.compile(strict_end_pattern(p1)), re.compile(strict_end_pattern(p2))
            witness = None
            for length in range(9):
                for chars in iproduct(alphabet, repeat=length):
                    s = "".join(chars)
                    if r1.search(s) and r2.search(s):
                        witness = s
                        break
                if witness is not None:
                    break
            if witness is None and not flagged_empty:
                # Possibly a witness longer than 8; verify one exists at all.
                from sicql.automata import product_intersection_empty, regex_to_dfa

                empty, w = product_intersection_empty(regex_to_dfa(p1), regex_to_dfa(p2))
                assert not empty and len(w) > 8, (p1, p2)
                continue
            assert flagged_empty == (witness is None), (p1, p2, witness)
            checked += 1
