"""Model clients: a deterministic scripted fake and an HTTP chat client."""

from sicql.models.base import (
    CONTRACT_BOOL_COT,
    CONTRACT_TEXT,
    CONTRACT_TYPED,
    CoT,
    JudgeResult,
    ModelRequest,
    ModelResponse,
    parse_bool,
    parse_cot,
)
from sicql.models.fake import FakeModel, FakeModelScript
from sicql.models.http import HttpModel

__all__ = [
    "CONTRACT_BOOL_COT",
    "CONTRACT_TEXT",
    "CONTRACT_TYPED",
    "CoT",
    "FakeModel",
    "FakeModelScript",
    "HttpModel",
    "JudgeResult",
    "ModelRequest",
    "ModelResponse",
    "parse_bool",
    "parse_cot",
]
