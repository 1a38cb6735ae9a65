"""Runtime value helpers shared by the interpreter and builtins."""

from __future__ import annotations

from dataclasses import dataclass

from ..tables import normalize_date, normalize_quarter


@dataclass(frozen=True)
class TimeRange:
    start: str
    end: str

    @staticmethod
    def of(start, end) -> "TimeRange":
        return TimeRange(_norm_bound(start), _norm_bound(end))


def _norm_bound(value) -> str:
    s = str(value).strip()
    try:
        return normalize_date(s)
    except ValueError:
        pass
    return normalize_quarter(s)  # ValueError propagates for garbage


def is_null(v) -> bool:
    return v is None


def is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def type_name(v) -> str:
    from ..charts import ChartSpec
    from ..tables import DataTable

    if v is None:
        return "null"
    if isinstance(v, bool):
        return "bool"
    if is_number(v):
        return "number"
    if isinstance(v, str):
        return "string"
    if isinstance(v, list):
        return "list"
    if isinstance(v, DataTable):
        return "table"
    if isinstance(v, TimeRange):
        return "range"
    if isinstance(v, ChartSpec):
        return "chart"
    return type(v).__name__
