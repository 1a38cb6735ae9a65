"""Chart specifications: the JSON artifact produced by visualization calls."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MalformedSpec, UnknownColumn
from .tables import DataTable

CHART_TYPES = ("line", "bar", "kline", "radar", "scatter", "area", "pie")

# fixed palette, assigned in series order; repeats past ten series
PALETTE = (
    "#c23531", "#2f4554", "#61a0a8", "#d48265", "#91c7ae",
    "#749f83", "#ca8622", "#bda29a", "#6e7074", "#546570",
)

_KLINE_COLS = ("open", "high", "low", "close")


@dataclass
class Series:
    name: str
    x: list
    y: list
    color: str = ""

    def to_json_obj(self) -> dict:
        return {"name": self.name, "color": self.color, "x": list(self.x), "y": list(self.y)}


@dataclass
class ChartSpec:
    chart_type: str
    title: str
    x_label: str
    y_label: str
    series: list[Series] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "type": self.chart_type,
            "title": self.title,
            "x_label": self.x_label,
            "y_label": self.y_label,
            "series": [s.to_json_obj() for s in self.series],
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "ChartSpec":
        for key in ("type", "title", "x_label", "y_label", "series"):
            if key not in obj:
                raise MalformedSpec(f"chart spec missing field {key!r}")
        return ChartSpec(
            chart_type=obj["type"],
            title=obj["title"],
            x_label=obj["x_label"],
            y_label=obj["y_label"],
            series=[
                Series(name=s.get("name", ""), x=s.get("x", []), y=s.get("y", []),
                       color=s.get("color", ""))
                for s in obj["series"]
            ],
        )


def _label_with_unit(table: DataTable, name: str) -> str:
    schema = table.schema_of(name)
    if schema.unit:
        return f"{name} ({schema.unit})"
    return name


def make_chart_spec(table: DataTable, chart_type: str, x: str, y_list: list[str],
                    title: str) -> ChartSpec:
    """Build a chart from a table.

    One y column plus a multi-valued identifier column splits into one
    series per identifier value; otherwise one series per y column.
    Kline always carries the four price series.
    """
    if chart_type not in CHART_TYPES:
        raise MalformedSpec(f"unknown chart type {chart_type!r}; expected one of {CHART_TYPES}")
    if not table.has_column(x):
        raise UnknownColumn(x, table.column_names)
    if chart_type == "kline":
        y_list = list(_KLINE_COLS)
    for y in y_list:
        if not table.has_column(y):
            raise UnknownColumn(y, table.column_names)
    if not y_list:
        raise MalformedSpec("chart needs at least one y column")

    x_vals = table.column(x)
    groups: list[tuple[str, list, list]] = []

    ident = None
    if chart_type != "kline" and len(y_list) == 1:
        for col in table.identifier_columns():
            if col.name != x and len(set(table.column(col.name))) > 1:
                ident = col.name
                break
    if ident is not None:
        y = y_list[0]
        y_vals = table.column(y)
        ident_vals = table.column(ident)
        seen = []
        for v in ident_vals:
            if v not in seen:
                seen.append(v)
        for value in seen:
            xs = [x_vals[i] for i in range(table.row_count) if ident_vals[i] == value]
            ys = [y_vals[i] for i in range(table.row_count) if ident_vals[i] == value]
            groups.append((str(value), xs, ys))
        y_label = _label_with_unit(table, y)
    else:
        for y in y_list:
            groups.append((y, list(x_vals), list(table.column(y))))
        y_label = _label_with_unit(table, y_list[0]) if len(y_list) == 1 else ", ".join(y_list)

    series = [
        Series(name=name, x=xs, y=ys, color=PALETTE[i % len(PALETTE)])
        for i, (name, xs, ys) in enumerate(groups)
    ]
    return ChartSpec(
        chart_type=chart_type,
        title=title,
        x_label=_label_with_unit(table, x),
        y_label=y_label,
        series=series,
    )
