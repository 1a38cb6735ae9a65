"""Interpreter for interface bodies.

Expressions are vectorized: inside derive/filter/groupby_agg arguments,
bare names resolve to table columns (full series) before falling back to
outer scope, and operators map elementwise when either side is a list.
Nulls propagate through arithmetic; aggregates skip them.

Any failure surfaces as a runtime Diagnostics, never an exception.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import CopilotError
from ..tables import ColumnSchema, DataTable
from .builtins import AGG_FNS, COLUMN_SCOPE, EAGER, BuiltinError, infer_semantic
from .diagnostics import Diagnostics, Loc, excerpt_line
from .parser import BinOp, Bool, BodyProgram, Call, ListLit, Name, Null, Num, Str, Unary
from .values import is_number, type_name


@dataclass
class EvalContext:
    catalog: object


class _RuntimeErr(Exception):
    def __init__(self, message: str, loc: Loc):
        self.message = message
        self.loc = loc


class _Scope:
    def __init__(self, env: dict, table: DataTable | None = None):
        self.env = env
        self.table = table  # column scope when set

    def resolve(self, ident: str, loc: Loc):
        if self.table is not None and self.table.has_column(ident):
            return list(self.table.column(ident))
        if ident in self.env:
            return self.env[ident]
        raise _RuntimeErr(f"unknown name {ident!r}", loc)


def run_body(program: BodyProgram, bindings: dict, catalog) -> object | Diagnostics:
    env = dict(bindings)
    missing = [n for n in program.free_names if n not in env]
    if missing:
        return Diagnostics(
            phase="runtime",
            message=f"missing bindings for parameters: {', '.join(missing)}",
            location=Loc(1, 1),
            excerpt=excerpt_line(program.source, 1),
        )
    ctx = EvalContext(catalog=catalog)
    scope = _Scope(env)
    for stmt in program.statements:
        try:
            env[stmt.target] = _eval(stmt.expr, scope, ctx)
        except _RuntimeErr as exc:
            return Diagnostics(
                phase="runtime",
                message=exc.message,
                location=exc.loc,
                excerpt=excerpt_line(program.source, exc.loc.line),
            )
        except Exception as exc:  # totality: no unstructured crashes
            return Diagnostics(
                phase="runtime",
                message=f"{type(exc).__name__}: {exc}",
                location=stmt.loc,
                excerpt=excerpt_line(program.source, stmt.loc.line),
            )
    return env[program.return_name]


# -- expression evaluation -------------------------------------------------


def _eval(expr, scope: _Scope, ctx: EvalContext):
    if isinstance(expr, Num):
        value = expr.value
        return int(value) if value == int(value) and abs(value) < 1e15 else value
    if isinstance(expr, Str):
        return expr.value
    if isinstance(expr, Bool):
        return expr.value
    if isinstance(expr, Null):
        return None
    if isinstance(expr, Name):
        return scope.resolve(expr.ident, expr.loc)
    if isinstance(expr, ListLit):
        return [_eval(item, scope, ctx) for item in expr.items]
    if isinstance(expr, Unary):
        return _unary(expr.op, _eval(expr.operand, scope, ctx), expr.loc)
    if isinstance(expr, BinOp):
        left = _eval(expr.left, scope, ctx)
        right = _eval(expr.right, scope, ctx)
        return _binop(expr.op, left, right, expr.loc)
    if isinstance(expr, Call):
        return _call(expr, scope, ctx)
    raise _RuntimeErr(f"cannot evaluate {type(expr).__name__}", expr.loc)


def _call(call: Call, scope: _Scope, ctx: EvalContext):
    fn = call.func
    if fn in COLUMN_SCOPE:
        return _column_scope_call(call, scope, ctx)
    args = [_eval(arg, scope, ctx) for arg in call.args]
    try:
        return EAGER[fn](args, ctx)
    except (BuiltinError, CopilotError) as exc:
        raise _RuntimeErr(str(exc), call.loc) from None


def _column_scope_call(call: Call, scope: _Scope, ctx: EvalContext):
    fn = call.func
    table = _eval(call.args[0], scope, ctx)
    if not isinstance(table, DataTable):
        raise _RuntimeErr(f"{fn}: argument 1 must be a table, got {type_name(table)}", call.loc)

    if fn == "filter":
        pred = _eval(call.args[1], _Scope(scope.env, table), ctx)
        if isinstance(pred, list):
            if len(pred) != table.row_count:
                raise _RuntimeErr(
                    f"filter: predicate length {len(pred)} != row count {table.row_count}", call.loc
                )
            mask = [v is True for v in pred]
        else:
            mask = [pred is True] * table.row_count
        return table.filter_mask(mask)

    if fn == "derive":
        out = table
        for name, sub in call.named:
            value = _eval(sub, _Scope(scope.env, out), ctx)
            column = _as_column(value, out.row_count, name, sub.loc)
            out = out.with_column(ColumnSchema(name, infer_semantic(column)), column)
        return out

    if fn == "groupby_agg":
        keys = _eval(call.args[1], scope, ctx)
        if not isinstance(keys, list) or not all(isinstance(k, str) for k in keys):
            raise _RuntimeErr("groupby_agg: keys must be a list of column names", call.loc)
        for k in keys:
            if not table.has_column(k):
                raise _RuntimeErr(f"groupby_agg: no column {k!r}", call.loc)
        return _groupby(table, keys, call.named, scope, ctx)

    raise _RuntimeErr(f"unhandled column-scope builtin {fn}", call.loc)  # pragma: no cover


def _as_column(value, rows: int, name: str, loc: Loc) -> list:
    if isinstance(value, list):
        if len(value) != rows:
            raise _RuntimeErr(f"derive: {name} has length {len(value)}, table has {rows} rows", loc)
        return list(value)
    return [value] * rows


def _groupby(table: DataTable, keys: list, named, scope: _Scope, ctx: EvalContext) -> DataTable:
    key_cols = [table.column(k) for k in keys]
    order: list[tuple] = []
    members: dict[tuple, list[int]] = {}
    for i in range(table.row_count):
        tag = tuple(col[i] for col in key_cols)
        if tag not in members:
            members[tag] = []
            order.append(tag)
        members[tag].append(i)

    out_schema = [table.schema_of(k) for k in keys]
    out_cols: list[list] = [[tag[j] for tag in order] for j in range(len(keys))]
    for out_name, agg_call in named:
        column = []
        for tag in order:
            sub = table.take(members[tag])
            if agg_call.args:
                series = _eval(agg_call.args[0], _Scope(scope.env, sub), ctx)
                if not isinstance(series, list):
                    series = [series] * sub.row_count
                values = [v for v in series if v is not None]
            else:  # count()
                values = [1] * sub.row_count
            column.append(_aggregate(agg_call.func, values, sub.row_count))
        out_schema.append(ColumnSchema(out_name, infer_semantic(column)))
        out_cols.append(column)
    return DataTable(out_schema, out_cols)


def _aggregate(fn: str, values: list, group_size: int):
    assert fn in AGG_FNS
    if fn == "count":
        return len(values)
    if fn == "sum":
        return sum(values) if values else 0
    if not values:
        return None
    if fn == "avg":
        return sum(values) / len(values)
    if fn == "min":
        return min(values)
    if fn == "max":
        return max(values)
    if fn == "first":
        return values[0]
    return values[-1]  # last


# -- operators -------------------------------------------------------------


def _unary(op: str, value, loc: Loc):
    if isinstance(value, list):
        return [_unary_scalar(op, v, loc) for v in value]
    return _unary_scalar(op, value, loc)


def _unary_scalar(op: str, v, loc: Loc):
    if v is None:
        return None
    if op == "-":
        if not is_number(v):
            raise _RuntimeErr(f"cannot negate {type_name(v)}", loc)
        return -v
    if not isinstance(v, bool):
        raise _RuntimeErr(f"'not' expects a bool, got {type_name(v)}", loc)
    return not v


def _binop(op: str, left, right, loc: Loc):
    if isinstance(left, list) or isinstance(right, list):
        if isinstance(left, list) and isinstance(right, list):
            if len(left) != len(right):
                raise _RuntimeErr(f"length mismatch: {len(left)} vs {len(right)}", loc)
            return [_binop_scalar(op, a, b, loc) for a, b in zip(left, right)]
        if isinstance(left, list):
            return [_binop_scalar(op, a, right, loc) for a in left]
        return [_binop_scalar(op, left, b, loc) for b in right]
    return _binop_scalar(op, left, right, loc)


def _binop_scalar(op: str, a, b, loc: Loc):
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op in ("and", "or"):
        return _logic(op, a, b, loc)
    if a is None or b is None:
        return None
    if op in ("<", "<=", ">", ">="):
        ok = (is_number(a) and is_number(b)) or (isinstance(a, str) and isinstance(b, str))
        if not ok:
            raise _RuntimeErr(f"cannot compare {type_name(a)} with {type_name(b)}", loc)
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    if op == "+" and isinstance(a, str) and isinstance(b, str):
        return a + b
    if not (is_number(a) and is_number(b)):
        raise _RuntimeErr(f"cannot apply {op!r} to {type_name(a)} and {type_name(b)}", loc)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        raise _RuntimeErr("division by zero", loc)
    return a / b


def _logic(op: str, a, b, loc: Loc):
    for v in (a, b):
        if v is not None and not isinstance(v, bool):
            raise _RuntimeErr(f"{op!r} expects bools, got {type_name(v)}", loc)
    if op == "and":
        if a is False or b is False:
            return False
        if a is None or b is None:
            return None
        return True
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False
