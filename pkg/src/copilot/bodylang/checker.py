"""Static checks for parsed bodies: names, arity, argument shapes.

Free names (used but never assigned) become the body's parameters.
Column-scope expression arguments (derive/filter/groupby_agg) resolve
names against table columns at runtime, so name analysis skips them but
call structure inside them is still checked.
"""

from __future__ import annotations

from .builtins import AGG_FNS, SIGNATURES
from .diagnostics import Diagnostics, excerpt_line
from .parser import BinOp, BodyProgram, Call, ListLit, Name, Str, Unary


class _CheckError(Exception):
    def __init__(self, message, loc):
        self.message = message
        self.loc = loc


def check(program: BodyProgram) -> BodyProgram | Diagnostics:
    try:
        _check(program)
        return program
    except _CheckError as exc:
        return Diagnostics(
            phase="typecheck",
            message=exc.message,
            location=exc.loc,
            excerpt=excerpt_line(program.source, exc.loc.line),
        )


def _check(program: BodyProgram) -> None:
    targets = {s.target for s in program.statements}
    defined: set[str] = set()
    free: list[str] = []

    for stmt in program.statements:
        _walk(stmt.expr, defined, targets, free, in_column_scope=False, in_agg=False)
        if stmt.target in defined:
            raise _CheckError(f"name {stmt.target!r} assigned twice", stmt.loc)
        if stmt.target in free:
            raise _CheckError(f"cannot assign to parameter {stmt.target!r}", stmt.loc)
        defined.add(stmt.target)

    if program.return_name not in defined:
        if program.return_name in free or program.return_name not in targets:
            raise _CheckError(
                f"return name {program.return_name!r} is never assigned", program.return_loc
            )
    program.free_names = free


def _walk(expr, defined, targets, free, in_column_scope, in_agg) -> None:
    if isinstance(expr, Name):
        if in_column_scope:
            return  # resolves against columns, then outer scope, at runtime
        ident = expr.ident
        if ident in defined or ident in free:
            return
        if ident in targets:
            raise _CheckError(f"name {ident!r} used before assignment", expr.loc)
        free.append(ident)
        return
    if isinstance(expr, (BinOp,)):
        _walk(expr.left, defined, targets, free, in_column_scope, in_agg)
        _walk(expr.right, defined, targets, free, in_column_scope, in_agg)
        return
    if isinstance(expr, Unary):
        _walk(expr.operand, defined, targets, free, in_column_scope, in_agg)
        return
    if isinstance(expr, ListLit):
        for item in expr.items:
            _walk(item, defined, targets, free, in_column_scope, in_agg)
        return
    if isinstance(expr, Call):
        _check_call(expr, defined, targets, free, in_column_scope, in_agg)
        return
    # literals carry nothing to check


def _check_call(call: Call, defined, targets, free, in_column_scope, in_agg) -> None:
    fn = call.func
    if fn in AGG_FNS:
        if not in_agg:
            raise _CheckError(
                f"aggregate function {fn!r} is only valid inside groupby_agg", call.loc
            )
        if call.named:
            raise _CheckError(f"{fn}: named arguments not allowed", call.loc)
        max_args = 1
        min_args = 0 if fn == "count" else 1
        if not (min_args <= len(call.args) <= max_args):
            raise _CheckError(f"{fn}: expects {min_args}..{max_args} column argument", call.loc)
        for arg in call.args:
            _walk(arg, defined, targets, free, in_column_scope=True, in_agg=False)
        return

    if fn not in SIGNATURES:
        valid = ", ".join(sorted(SIGNATURES))
        raise _CheckError(f"unknown builtin {fn!r}; valid builtins: {valid}", call.loc)
    min_args, max_args, named_mode = SIGNATURES[fn]
    if len(call.args) < min_args or (max_args is not None and len(call.args) > max_args):
        bound = f"{min_args}" if max_args == min_args else f"{min_args}..{max_args or 'n'}"
        raise _CheckError(f"{fn}: expects {bound} positional arguments, got {len(call.args)}", call.loc)
    if call.named and named_mode == "none":
        raise _CheckError(f"{fn}: named arguments not allowed", call.loc)
    if named_mode == "exprs" and not call.named:
        raise _CheckError(f"{fn}: needs at least one named expression argument", call.loc)

    if fn == "make_table" and len(call.args) % 2 != 0:
        raise _CheckError("make_table: expects name, list pairs", call.loc)
    for pos, literal in ((3, "sort"), (3, "topk")):
        if fn == literal and len(call.args) > pos:
            arg = call.args[pos]
            if isinstance(arg, Str) and arg.value not in ("asc", "desc"):
                raise _CheckError(f'{fn}: order must be "asc" or "desc"', arg.loc)

    if fn == "filter":
        # first arg is the table (outer scope), second the predicate (column scope)
        _walk(call.args[0], defined, targets, free, in_column_scope, in_agg=False)
        _walk(call.args[1], defined, targets, free, in_column_scope=True, in_agg=False)
        return
    if fn == "derive":
        _walk(call.args[0], defined, targets, free, in_column_scope, in_agg=False)
        for _, sub in call.named:
            _walk(sub, defined, targets, free, in_column_scope=True, in_agg=False)
        return
    if fn == "groupby_agg":
        _walk(call.args[0], defined, targets, free, in_column_scope, in_agg=False)
        _walk(call.args[1], defined, targets, free, in_column_scope, in_agg=False)
        for _, sub in call.named:
            if not isinstance(sub, Call) or sub.func not in AGG_FNS:
                raise _CheckError(
                    "groupby_agg: named arguments must be aggregate calls "
                    f"({', '.join(AGG_FNS)})",
                    sub.loc,
                )
            _check_call(sub, defined, targets, free, in_column_scope, in_agg=True)
        return

    for arg in call.args:
        _walk(arg, defined, targets, free, in_column_scope, in_agg=False)
    for _, sub in call.named:
        _walk(sub, defined, targets, free, in_column_scope, in_agg=False)
