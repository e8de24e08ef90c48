"""Physical plan execution over in-memory relations."""

from sicql.engine.data import Relation, RowTuple, load_table, row_to_json
from sicql.engine.executor import Executor, RunContext, RunResult, execute

__all__ = [
    "Executor",
    "Relation",
    "RowTuple",
    "RunContext",
    "RunResult",
    "execute",
    "load_table",
    "row_to_json",
]
