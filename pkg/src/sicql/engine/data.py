"""Tuples, relations, and dataset IO.

Datasets load from CSV (header row, RFC-4180 quoting, values typed via the
optional schema) or JSONL (one object per row, native JSON types). Result
rows serialize with the reserved fields ``_tuple_id``, ``_flags`` and
``_parents``.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

from sicql.errors import EngineError
from sicql.exprs import cast_value
from sicql.lang.ast import ValueType


@dataclass
class RowTuple:
    tuple_id: str
    values: dict[str, object]
    flags: set[str] = field(default_factory=set)
    parents: tuple[str, ...] = ()


@dataclass
class Relation:
    columns: list[str]
    rows: list[RowTuple]

    def __len__(self) -> int:
        return len(self.rows)


def load_table(path: str | Path, schema: dict[str, ValueType] | None = None) -> list[dict]:
    """Read raw rows from a CSV or JSONL file."""
    path = Path(path)
    if not path.exists():
        raise EngineError(f"missing table file: {path}")
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [dict(r) for r in csv.DictReader(fh)]
    elif path.suffix.lower() in (".jsonl", ".ndjson"):
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
    else:
        raise EngineError(f"unsupported dataset format: {path.suffix!r} (use .csv or .jsonl)")
    if schema:
        rows = [coerce_row(r, schema) for r in rows]
    return rows


def coerce_row(raw: dict, schema: dict[str, ValueType]) -> dict:
    out = dict(raw)
    for name, vtype in schema.items():
        if name in out and out[name] is not None:
            out[name] = cast_value(out[name], vtype)
    return out


def value_to_json(v):
    if isinstance(v, dt.date):
        return v.isoformat()
    return v


def row_to_json(row: RowTuple) -> dict:
    out = {name: value_to_json(v) for name, v in row.values.items()}
    out["_tuple_id"] = row.tuple_id
    out["_flags"] = sorted(row.flags)
    out["_parents"] = list(row.parents)
    return out
