"""Builtin functions for interface bodies.

Eager builtins receive evaluated values. The column-scope builtins
(derive, filter, groupby_agg) are interpreted specially because their
expression arguments see table columns as names; they are declared here
for signature checking but implemented in the interpreter.
"""

from __future__ import annotations

from ..catalog import FetchQuery
from ..charts import make_chart_spec
from ..errors import InsufficientData
from ..tables import ColumnSchema, DataTable
from .values import TimeRange, is_number, type_name

# name -> (min_args, max_args, named_mode); max None = unbounded
# named_mode: "none" | "exprs" (named column-scope expressions allowed)
SIGNATURES = {
    "fetch": (2, 3, "none"),
    "range": (2, 2, "none"),
    "column": (2, 2, "none"),
    "select": (2, 2, "none"),
    "derive": (1, 1, "exprs"),
    "filter": (2, 2, "none"),
    "sort": (2, 3, "none"),
    "head": (2, 2, "none"),
    "concat": (1, None, "none"),
    "join": (3, 3, "none"),
    "groupby_agg": (2, 2, "exprs"),
    "pivot": (4, 4, "none"),
    "topk": (4, 4, "none"),
    "with_col": (3, 3, "none"),
    "pct_change": (2, 2, "none"),
    "moving_avg": (2, 2, "none"),
    "cum_return": (1, 1, "none"),
    "predict_next": (2, 2, "none"),
    "ints": (2, 2, "none"),
    "make_table": (2, None, "none"),
    "make_chart": (5, 5, "none"),
    "key_col": (1, 1, "none"),
    "numeric_cols": (1, 1, "none"),
    "length": (1, 1, "none"),
}

COLUMN_SCOPE = ("derive", "filter", "groupby_agg")
AGG_FNS = ("sum", "avg", "min", "max", "count", "first", "last")


class BuiltinError(Exception):
    """Raised by builtins for bad arguments; becomes a runtime diagnostic."""


def _want_table(v, fn: str, pos: int) -> DataTable:
    if not isinstance(v, DataTable):
        raise BuiltinError(f"{fn}: argument {pos} must be a table, got {type_name(v)}")
    return v


def _want_str(v, fn: str, pos: int) -> str:
    if not isinstance(v, str):
        raise BuiltinError(f"{fn}: argument {pos} must be a string, got {type_name(v)}")
    return v


def _want_int(v, fn: str, pos: int) -> int:
    if not is_number(v) or float(v) != int(v):
        raise BuiltinError(f"{fn}: argument {pos} must be an integer, got {type_name(v)}")
    return int(v)


def _want_series(v, fn: str, pos: int) -> list:
    if not isinstance(v, list):
        raise BuiltinError(f"{fn}: argument {pos} must be a list, got {type_name(v)}")
    return v


def _want_order(v, fn: str) -> bool:
    order = _want_str(v, fn, 0)
    if order not in ("asc", "desc"):
        raise BuiltinError(f'{fn}: order must be "asc" or "desc", got {order!r}')
    return order == "desc"


# -- acquisition -----------------------------------------------------------


def bi_fetch(args, ctx):
    source = _want_str(args[0], "fetch", 1)
    trange = args[1]
    if not isinstance(trange, TimeRange):
        raise BuiltinError(f"fetch: argument 2 must be a range(...), got {type_name(trange)}")
    frequency = _want_str(args[2], "fetch", 3) if len(args) > 2 else None
    return ctx.catalog.fetch(source, FetchQuery(time_range=(trange.start, trange.end), frequency=frequency))


def bi_range(args, ctx):
    try:
        return TimeRange.of(args[0], args[1])
    except (ValueError, TypeError) as exc:
        raise BuiltinError(f"range: {exc}") from None


# -- table shaping ---------------------------------------------------------


def bi_column(args, ctx):
    t = _want_table(args[0], "column", 1)
    return list(t.column(_want_str(args[1], "column", 2)))


def bi_select(args, ctx):
    t = _want_table(args[0], "select", 1)
    names = _want_series(args[1], "select", 2)
    return t.select([_want_str(n, "select", 2) for n in names])


def bi_sort(args, ctx):
    t = _want_table(args[0], "sort", 1)
    col = _want_str(args[1], "sort", 2)
    descending = _want_order(args[2], "sort") if len(args) > 2 else False
    return t.sort_by(col, descending=descending)


def bi_head(args, ctx):
    t = _want_table(args[0], "head", 1)
    return t.head(_want_int(args[1], "head", 2))


def bi_concat(args, ctx):
    items = args[0] if len(args) == 1 and isinstance(args[0], list) else list(args)
    if isinstance(items, DataTable):
        return items
    tables = [_want_table(t, "concat", i + 1) for i, t in enumerate(items)]
    if not tables:
        raise BuiltinError("concat: needs at least one table")
    return DataTable.concat(tables)


def bi_join(args, ctx):
    t1 = _want_table(args[0], "join", 1)
    t2 = _want_table(args[1], "join", 2)
    key = _want_str(args[2], "join", 3)
    for t, pos in ((t1, 1), (t2, 2)):
        if not t.has_column(key):
            raise BuiltinError(f"join: table {pos} has no column {key!r}")
    taken = {c.name for c in t1.columns}
    right_cols = []
    for c in t2.columns:
        if c.name == key:
            continue
        name = c.name if c.name not in taken else f"{c.name}_2"
        right_cols.append((c, name))
    schema = list(t1.columns) + [
        ColumnSchema(name, c.semantic_type, c.description, c.unit) for c, name in right_cols
    ]
    index: dict = {}
    key_vals2 = t2.column(key)
    for j in range(t2.row_count):
        index.setdefault(key_vals2[j], []).append(j)
    rows = []
    key_vals1 = t1.column(key)
    for i in range(t1.row_count):
        for j in index.get(key_vals1[i], []):
            rows.append(t1.row(i) + [t2.column(c.name)[j] for c, _ in right_cols])
    return DataTable.from_rows(schema, rows)


def bi_pivot(args, ctx):
    t = _want_table(args[0], "pivot", 1)
    idx = _want_str(args[1], "pivot", 2)
    col = _want_str(args[2], "pivot", 3)
    val = _want_str(args[3], "pivot", 4)
    for name in (idx, col, val):
        if not t.has_column(name):
            raise BuiltinError(f"pivot: no column {name!r}")
    idx_vals, col_vals, val_vals = t.column(idx), t.column(col), t.column(val)
    row_keys, col_keys = [], []
    for v in idx_vals:
        if v not in row_keys:
            row_keys.append(v)
    for v in col_vals:
        if v not in col_keys:
            col_keys.append(v)
    cells = {}
    for i in range(t.row_count):
        cells[(idx_vals[i], col_vals[i])] = val_vals[i]  # last wins
    schema = [t.schema_of(idx)] + [ColumnSchema(str(c), "number") for c in col_keys]
    rows = [[rk] + [cells.get((rk, ck)) for ck in col_keys] for rk in row_keys]
    return DataTable.from_rows(schema, rows)


def bi_topk(args, ctx):
    t = _want_table(args[0], "topk", 1)
    col = _want_str(args[1], "topk", 2)
    k = _want_int(args[2], "topk", 3)
    descending = _want_order(args[3], "topk")
    if not t.has_column(col):
        raise BuiltinError(f"topk: no column {col!r}")
    if k < 0:
        raise BuiltinError("topk: k must be >= 0")
    vals = t.column(col)
    candidates = [i for i in range(t.row_count) if vals[i] is not None]
    candidates.sort(key=lambda i: vals[i], reverse=descending)  # timsort keeps ties stable
    return t.take(candidates[:k])


def bi_with_col(args, ctx):
    t = _want_table(args[0], "with_col", 1)
    name = _want_str(args[1], "with_col", 2)
    series = _want_series(args[2], "with_col", 3)
    if len(series) != t.row_count:
        raise BuiltinError(f"with_col: series length {len(series)} != row count {t.row_count}")
    return t.with_column(ColumnSchema(name, infer_semantic(series)), list(series))


def infer_semantic(series: list) -> str:
    non_null = [v for v in series if v is not None]
    if non_null and all(isinstance(v, str) for v in non_null):
        return "text"
    return "number"


# -- series math -----------------------------------------------------------


def bi_pct_change(args, ctx):
    series = _want_series(args[0], "pct_change", 1)
    lag = _want_int(args[1], "pct_change", 2)
    if lag < 1:
        raise BuiltinError("pct_change: lag must be >= 1")
    out = []
    for i, v in enumerate(series):
        if i < lag or v is None or series[i - lag] in (None, 0):
            out.append(None)
        else:
            out.append((v - series[i - lag]) / series[i - lag])
    return out


def bi_moving_avg(args, ctx):
    series = _want_series(args[0], "moving_avg", 1)
    window = _want_int(args[1], "moving_avg", 2)
    if window < 1:
        raise BuiltinError("moving_avg: window must be >= 1")
    out = []
    for i in range(len(series)):
        if i < window - 1:
            out.append(None)
            continue
        values = [v for v in series[i - window + 1:i + 1] if v is not None]
        out.append(sum(values) / len(values) if values else None)
    return out


def bi_cum_return(args, ctx):
    series = _want_series(args[0], "cum_return", 1)
    base = next((v for v in series if v is not None), None)
    started = False
    out = []
    for v in series:
        if v is not None:
            started = True
        if not started or v is None or base in (None, 0):
            out.append(None)
        else:
            out.append(v / base - 1)
    return out


def bi_predict_next(args, ctx):
    series = _want_series(args[0], "predict_next", 1)
    horizon = _want_int(args[1], "predict_next", 2)
    if horizon < 1:
        raise BuiltinError("predict_next: horizon must be >= 1")
    return predict_next(series, horizon)


def predict_next(series: list, horizon: int) -> list:
    """Least-squares line over (index, value), extrapolated `horizon` points."""
    points = [(i, v) for i, v in enumerate(series) if v is not None]
    if len(points) < 2:
        raise InsufficientData(f"predict_next needs >= 2 known values, got {len(points)}")
    n = len(points)
    mean_x = sum(p[0] for p in points) / n
    mean_y = sum(p[1] for p in points) / n
    var = sum((p[0] - mean_x) ** 2 for p in points)
    cov = sum((p[0] - mean_x) * (p[1] - mean_y) for p in points)
    slope = cov / var
    intercept = mean_y - slope * mean_x
    start = len(series)
    return [intercept + slope * (start + h) for h in range(horizon)]


# -- construction ----------------------------------------------------------


def bi_ints(args, ctx):
    start = _want_int(args[0], "ints", 1)
    count = _want_int(args[1], "ints", 2)
    if count < 0:
        raise BuiltinError("ints: count must be >= 0")
    return list(range(start, start + count))


def bi_make_table(args, ctx):
    if len(args) % 2 != 0:
        raise BuiltinError("make_table: expects name, list pairs")
    schema, columns = [], []
    length = None
    for i in range(0, len(args), 2):
        name = _want_str(args[i], "make_table", i + 1)
        series = _want_series(args[i + 1], "make_table", i + 2)
        if length is None:
            length = len(series)
        elif len(series) != length:
            raise BuiltinError("make_table: columns must share one length")
        schema.append(ColumnSchema(name, infer_semantic(series)))
        columns.append(list(series))
    return DataTable(schema, columns)


def bi_make_chart(args, ctx):
    t = _want_table(args[0], "make_chart", 1)
    chart_type = _want_str(args[1], "make_chart", 2)
    x = _want_str(args[2], "make_chart", 3)
    y_list = [_want_str(y, "make_chart", 4) for y in _want_series(args[3], "make_chart", 4)]
    title = _want_str(args[4], "make_chart", 5)
    return make_chart_spec(t, chart_type, x, y_list, title)


# -- introspection ---------------------------------------------------------


def bi_key_col(args, ctx):
    t = _want_table(args[0], "key_col", 1)
    key = t.key_column()
    return key.name if key else None


def bi_numeric_cols(args, ctx):
    t = _want_table(args[0], "numeric_cols", 1)
    return [c.name for c in t.numeric_columns()]


def bi_length(args, ctx):
    v = args[0]
    if isinstance(v, list):
        return len(v)
    if isinstance(v, DataTable):
        return v.row_count
    if isinstance(v, str):
        return len(v)
    raise BuiltinError(f"length: expects a list, table, or string, got {type_name(v)}")


EAGER = {
    "fetch": bi_fetch,
    "range": bi_range,
    "column": bi_column,
    "select": bi_select,
    "sort": bi_sort,
    "head": bi_head,
    "concat": bi_concat,
    "join": bi_join,
    "pivot": bi_pivot,
    "topk": bi_topk,
    "with_col": bi_with_col,
    "pct_change": bi_pct_change,
    "moving_avg": bi_moving_avg,
    "cum_return": bi_cum_return,
    "predict_next": bi_predict_next,
    "ints": bi_ints,
    "make_table": bi_make_table,
    "make_chart": bi_make_chart,
    "key_col": bi_key_col,
    "numeric_cols": bi_numeric_cols,
    "length": bi_length,
}
