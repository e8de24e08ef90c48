"""Shared fixtures: the EHR example query, synthetic data, scripted models."""

from __future__ import annotations

import datetime as dt

import pytest

from sicql.config import EngineConfig
from sicql.models import FakeModel, FakeModelScript

# The running EHR example query, desugared by the parser into one plan.
LISTING1 = r"""FROM ehr_table
|> SET dob = p'canonicalize {dob} into YYYY-MM-DD'
|> ASSERT REGEXP_CONTAINS(dob, r'^\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])$')
|> EXTEND DATE_PART('year', AGE(CURRENT_DATE, dob::DATE)) AS age_yrs
|> EXTEND EXTRACTIVE p'extract the patient''s admission physical exam from the {ehr}' AS phys_exam STRING
|> EXTEND EXTRACTIVE p'extract the patient''s admission lab results from the {ehr}' AS lab_res STRING
|> EXTEND EXTRACTIVE p'extract the patient''s medical history from the {ehr}' AS med_hist STRING
|> EXTEND ABSTRACTIVE p'summarize {med_hist}' AS med_hist_sum STRING
|> WHERE p'the patient is likely to have sepsis based on their {age_yrs}, {phys_exam}, {lab_res}, and {med_hist}' AS sepsis_filter
|> ASSERT phys_exam GROUNDED AND lab_res GROUNDED
|> ASSERT med_hist_sum GROUNDED AND LENGTH(med_hist_sum) < 1000
|> ASSERT med_hist_sum EXCLUDES p'test results'
     RETRY 1 CONTINUE ON FAIL
|> ASSERT sepsis_filter SOUND
"""

# Extended with an arbitrary-predicate assertion so every constraint class
# has a representative (the base query's expression predicates are all
# domain-shaped: a regex and a length bound).
LISTING1_EXT = LISTING1 + "|> ASSERT age_yrs >= 0 AND age_yrs < 130\n"


def make_ehr_rows(n: int) -> list[dict]:
    rows = []
    for i in range(n):
        risk = " septic-risk" if i % 2 == 0 else ""
        trouble = "troubled " if i == 2 else ""  # an even row: survives the filter flagged
        ehr = (
            f"Patient {i} admitted with fever. "
            f"HISTORY: {trouble}chronic hypertension case {i} with prior episodes. "
            f"EXAM: temperature elevated, heart rate {90 + i} bpm,{risk} alert. "
            f"LABS: lactate {1.5 + 0.1 * i:.1f} mmol/L, wbc elevated. END."
        )
        rows.append({"ehr": ehr, "dob": f"3/{10 + (i % 15)}/19{60 + i % 30}"})
    return rows


def listing1_script() -> FakeModelScript:
    return FakeModelScript.from_dict(
        {
            "rules": [
                # First attempt echoes the sloppy source format and fails the
                # regex; the retry produces a canonical date.
                {"match": "canonicalize", "responses": ["{dob}", "1985-03-12"]},
                {"match": "physical exam", "copy_field": "ehr", "between": ["EXAM:", "LABS:"], "strip": True},
                {"match": "lab results", "copy_field": "ehr", "between": ["LABS:", "END."], "strip": True},
                {"match": "medical history", "copy_field": "ehr", "between": ["HISTORY:", "EXAM:"], "strip": True},
                {
                    "match": r"summarize.*troubled",
                    "response": "Summary: chronic condition; see test results attached.",
                },
                {"match": "summarize", "response": "Summary: chronic hypertension with prior episodes."},
                {
                    "match": r"sepsis.*septic-risk",
                    "response": "PREMISES:\n- the exam notes septic-risk\n- lactate is elevated\nSTEPS:\n- risk markers plus elevated lactate indicate likely sepsis\nANSWER: true",
                },
                {
                    "match": "sepsis",
                    "response": "PREMISES:\n- vitals are near normal\nSTEPS:\n- no sepsis markers are present\nANSWER: false",
                },
            ],
            "judge": {
                "default_verdict": True,
                "default_confidence": 0.9,
                "rules": [
                    {"mode": "semantic-match", "pattern": "test results", "applies_to": "output", "verdict": True, "confidence": 0.95},
                    {"mode": "semantic-match", "verdict": False, "confidence": 0.9},
                    {"mode": "fact-check", "pattern": "UNSUPPORTED", "applies_to": "output", "verdict": False, "confidence": 0.95},
                    {"mode": "relevance", "pattern": "social history", "applies_to": "output", "verdict": False, "confidence": 0.9},
                ],
            },
        }
    )


@pytest.fixture
def ehr_rows() -> list[dict]:
    return make_ehr_rows(5)


@pytest.fixture
def fake_client() -> FakeModel:
    return FakeModel(listing1_script(), seed=7)


@pytest.fixture
def engine_config() -> EngineConfig:
    # Reactive domain checks (so retries are visible); extractive grounding
    # may still be mask-enforced.
    return EngineConfig(
        decode_allowlist=frozenset({"grounding-extractive"}),
        current_date=dt.date(2025, 1, 1),
    )
