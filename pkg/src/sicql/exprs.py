"""Expression typing and evaluation for the dialect's scalar sublanguage.

Shared by the parser (static checks), the checkers (assertions) and the
engine (SET/EXTEND/WHERE over expressions). Unknown column types (inferred
scan columns) type-check as wildcards and are coerced at runtime.
"""

from __future__ import annotations

import calendar
import datetime as dt
import re
from dataclasses import dataclass

from sicql.errors import EngineError
from sicql.lang.ast import (
    AttrRef,
    Binary,
    Cast,
    Expr,
    FuncCall,
    InList,
    Literal,
    Unary,
    ValueType,
)

INTERVAL = "INTERVAL"

NUMERIC = {ValueType.INT, ValueType.FLOAT}

BUILTINS = {"LENGTH", "REGEXP_CONTAINS", "DATE_PART", "AGE", "CURRENT_DATE"}


class TypeMismatch(Exception):
    """Static type error; the parser re-raises with a source position."""


@dataclass(frozen=True)
class Interval:
    years: int
    months: int
    days: int

    def __str__(self) -> str:
        return f"{self.years} years {self.months} mons {self.days} days"


def infer_type(expr: Expr, env: dict[str, ValueType | None]):
    """Return the expression's type: a ValueType, INTERVAL, or None (unknown).

    Raises TypeMismatch for definite incompatibilities; unknown-typed
    operands unify with anything.
    """
    if isinstance(expr, Literal):
        return expr.vtype
    if isinstance(expr, AttrRef):
        if expr.name not in env:
            raise TypeMismatch(f"unknown attribute '{expr.name}'")
        return env[expr.name]
    if isinstance(expr, Unary):
        t = infer_type(expr.operand, env)
        if expr.op == "NOT":
            _require(t, {ValueType.BOOL}, "NOT")
            return ValueType.BOOL
        _require(t, NUMERIC, "unary -")
        return t
    if isinstance(expr, Binary):
        lt = infer_type(expr.left, env)
        rt = infer_type(expr.right, env)
        op = expr.op
        if op in ("AND", "OR"):
            _require(lt, {ValueType.BOOL}, op)
            _require(rt, {ValueType.BOOL}, op)
            return ValueType.BOOL
        if op in ("=", "==", "<>", "<", "<=", ">", ">="):
            if lt is not None and rt is not None and lt != rt:
                if not (lt in NUMERIC and rt in NUMERIC):
                    raise TypeMismatch(f"cannot compare {lt.value} with {rt.value}")
            return ValueType.BOOL
        if op == "||":
            _require(lt, {ValueType.STRING}, "||")
            _require(rt, {ValueType.STRING}, "||")
            return ValueType.STRING
        # Arithmetic.
        _require(lt, NUMERIC, op)
        _require(rt, NUMERIC, op)
        if op == "/":
            return ValueType.FLOAT
        if lt == ValueType.FLOAT or rt == ValueType.FLOAT:
            return ValueType.FLOAT
        if lt is None or rt is None:
            return None
        return ValueType.INT
    if isinstance(expr, FuncCall):
        return _infer_call(expr, env)
    if isinstance(expr, Cast):
        infer_type(expr.operand, env)
        return expr.to_type
    if isinstance(expr, InList):
        infer_type(expr.operand, env)
        return ValueType.BOOL
    raise TypeMismatch(f"unhandled expression node {type(expr).__name__}")


def _require(t, allowed, where: str) -> None:
    if t is not None and t not in allowed:
        names = "/".join(sorted(a.value for a in allowed))
        tname = t.value if isinstance(t, ValueType) else str(t)
        raise TypeMismatch(f"{where} expects {names}, got {tname}")


def _infer_call(expr: FuncCall, env):
    name = expr.name.upper()
    if name not in BUILTINS:
        raise TypeMismatch(f"unknown function '{expr.name}'")

    def arity(n: int) -> None:
        if len(expr.args) != n:
            raise TypeMismatch(f"{name} takes {n} argument(s), got {len(expr.args)}")

    if name == "LENGTH":
        arity(1)
        _require(infer_type(expr.args[0], env), {ValueType.STRING}, "LENGTH")
        return ValueType.INT
    if name == "REGEXP_CONTAINS":
        arity(2)
        _require(infer_type(expr.args[0], env), {ValueType.STRING}, "REGEXP_CONTAINS")
        if not isinstance(expr.args[1], Literal) or expr.args[1].vtype != ValueType.STRING:
            raise TypeMismatch("REGEXP_CONTAINS requires a regex literal second argument")
        return ValueType.BOOL
    if name == "DATE_PART":
        arity(2)
        first = expr.args[0]
        if not (isinstance(first, Literal) and first.vtype == ValueType.STRING):
            raise TypeMismatch("DATE_PART requires a field name literal first argument")
        if first.value.lower() not in ("year", "month", "day"):
            raise TypeMismatch(f"unsupported DATE_PART field '{first.value}'")
        t = infer_type(expr.args[1], env)
        if t is not None and t != ValueType.DATE and t != INTERVAL:
            raise TypeMismatch("DATE_PART expects a DATE or interval second argument")
        return ValueType.INT
    if name == "AGE":
        arity(2)
        _require(infer_type(expr.args[0], env), {ValueType.DATE}, "AGE")
        _require(infer_type(expr.args[1], env), {ValueType.DATE}, "AGE")
        return INTERVAL
    # CURRENT_DATE
    arity(0)
    return ValueType.DATE


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def eval_expr(expr: Expr, values: dict[str, object], current_date: dt.date | None = None):
    """Evaluate under a tuple's attribute values with null propagation."""
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, AttrRef):
        if expr.name not in values:
            raise EngineError(f"attribute '{expr.name}' missing at evaluation time")
        return values[expr.name]
    if isinstance(expr, Unary):
        v = eval_expr(expr.operand, values, current_date)
        if v is None:
            return None
        return (not v) if expr.op == "NOT" else -v
    if isinstance(expr, Binary):
        return _eval_binary(expr, values, current_date)
    if isinstance(expr, FuncCall):
        return _eval_call(expr, values, current_date)
    if isinstance(expr, Cast):
        return cast_value(eval_expr(expr.operand, values, current_date), expr.to_type)
    if isinstance(expr, InList):
        v = eval_expr(expr.operand, values, current_date)
        if v is None:
            return None
        return any(v == item.value for item in expr.items)
    raise EngineError(f"unhandled expression node {type(expr).__name__}")


def _eval_binary(expr: Binary, values, current_date):
    op = expr.op
    if op in ("AND", "OR"):
        # SQL three-valued logic.
        lv = eval_expr(expr.left, values, current_date)
        rv = eval_expr(expr.right, values, current_date)
        if op == "AND":
            if lv is False or rv is False:
                return False
            if lv is None or rv is None:
                return None
            return bool(lv) and bool(rv)
        if lv is True or rv is True:
            return True
        if lv is None or rv is None:
            return None
        return bool(lv) or bool(rv)

    lv = eval_expr(expr.left, values, current_date)
    rv = eval_expr(expr.right, values, current_date)
    if lv is None or rv is None:
        return None
    if op == "||":
        return str(lv) + str(rv)
    if op in ("=", "==", "<>", "<", "<=", ">", ">="):
        lv, rv = _align(lv, rv)
        try:
            if op in ("=", "=="):
                return lv == rv
            if op == "<>":
                return lv != rv
            if op == "<":
                return lv < rv
            if op == "<=":
                return lv <= rv
            if op == ">":
                return lv > rv
            return lv >= rv
        except TypeError as exc:
            raise EngineError(f"cannot compare {type(lv).__name__} with {type(rv).__name__}") from exc
    try:
        if op == "+":
            return lv + rv
        if op == "-":
            return lv - rv
        if op == "*":
            return lv * rv
        if op == "/":
            return lv / rv if rv != 0 else None
        if op == "%":
            return lv % rv if rv != 0 else None
    except TypeError as exc:
        raise EngineError(f"arithmetic on non-numeric values: {lv!r} {op} {rv!r}") from exc
    raise EngineError(f"unknown operator {op}")


def _align(lv, rv):
    """Coerce numeric strings when compared against numbers (lenient scans)."""
    if isinstance(lv, str) and isinstance(rv, (int, float)) and not isinstance(rv, bool):
        try:
            return float(lv), float(rv)
        except ValueError:
            return lv, rv
    if isinstance(rv, str) and isinstance(lv, (int, float)) and not isinstance(lv, bool):
        try:
            return float(lv), float(rv)
        except ValueError:
            return lv, rv
    return lv, rv


def _eval_call(expr: FuncCall, values, current_date):
    name = expr.name.upper()
    if name == "CURRENT_DATE":
        return current_date or dt.date.today()
    args = [eval_expr(a, values, current_date) for a in expr.args]
    if name == "LENGTH":
        return None if args[0] is None else len(str(args[0]))
    if name == "REGEXP_CONTAINS":
        if args[0] is None or args[1] is None:
            return None
        return _regex_contains(str(args[0]), str(args[1]))
    if name == "AGE":
        if args[0] is None or args[1] is None:
            return None
        return age(_as_date(args[0]), _as_date(args[1]))
    if name == "DATE_PART":
        field, src = args
        if src is None:
            return None
        field = str(field).lower()
        if isinstance(src, Interval):
            return {"year": src.years, "month": src.months, "day": src.days}[field]
        d = _as_date(src)
        return {"year": d.year, "month": d.month, "day": d.day}[field]
    raise EngineError(f"unknown function {expr.name}")


def _regex_contains(text: str, pattern: str) -> bool:
    """Regex search with strict end-of-string anchors (dialect semantics)."""
    from sicql.automata.regex_dfa import strict_end_pattern

    return re.search(strict_end_pattern(pattern), text) is not None


def _as_date(v) -> dt.date:
    if isinstance(v, dt.date):
        return v
    parsed = parse_date(str(v))
    if parsed is None:
        raise EngineError(f"not a date: {v!r}")
    return parsed


def parse_date(text: str) -> dt.date | None:
    """Strict canonical YYYY-MM-DD parse; None when malformed."""
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        return None


def age(later: dt.date, earlier: dt.date) -> Interval:
    """Calendar difference with day/month borrowing, PostgreSQL-style."""
    if later < earlier:
        flipped = age(earlier, later)
        return Interval(-flipped.years, -flipped.months, -flipped.days)
    years = later.year - earlier.year
    months = later.month - earlier.month
    days = later.day - earlier.day
    if days < 0:
        months -= 1
        prev_year, prev_month = (later.year, later.month - 1) if later.month > 1 else (later.year - 1, 12)
        days += calendar.monthrange(prev_year, prev_month)[1]
    if months < 0:
        years -= 1
        months += 12
    return Interval(years, months, days)


def cast_value(value, to_type: ValueType):
    """SQL-style cast; malformed input yields NULL rather than an error."""
    if value is None:
        return None
    try:
        if to_type == ValueType.STRING:
            if isinstance(value, bool):
                return "true" if value else "false"
            if isinstance(value, dt.date):
                return value.isoformat()
            return str(value)
        if to_type == ValueType.INT:
            if isinstance(value, bool):
                return int(value)
            return int(str(value).strip()) if not isinstance(value, (int, float)) else int(value)
        if to_type == ValueType.FLOAT:
            return float(value) if isinstance(value, (int, float)) else float(str(value).strip())
        if to_type == ValueType.BOOL:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("true", "t", "yes", "1"):
                return True
            if text in ("false", "f", "no", "0"):
                return False
            return None
        if to_type == ValueType.DATE:
            if isinstance(value, dt.date):
                return value
            return parse_date(str(value))
    except (ValueError, TypeError):
        return None
    return None


def coerce_to_type(text: str, to_type: ValueType | None):
    """Parse raw model output into a typed value; None signals a parse failure.

    Unlike ``cast_value`` this is strict: the whole string must be the value.
    """
    if to_type is None or to_type == ValueType.STRING:
        return text
    s = text.strip()
    if to_type == ValueType.INT:
        if re.fullmatch(r"-?\d+", s):
            return int(s)
        return None
    if to_type == ValueType.FLOAT:
        if re.fullmatch(r"-?\d+(\.\d+)?([eE][+-]?\d+)?", s):
            return float(s)
        return None
    if to_type == ValueType.BOOL:
        low = s.lower()
        if low in ("true", "false"):
            return low == "true"
        return None
    if to_type == ValueType.DATE:
        return parse_date(s)
    return None
