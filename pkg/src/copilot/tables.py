"""Columnar tables: the universal value flowing through workflows.

A DataTable is a list of typed columns plus column-major value arrays.
Cells are plain Python values: floats for numeric types, ISO-8601 strings
for dates, "YYYYQn" strings for quarters, str for text/identifier, and
None for missing. Dates and quarters are normalized at construction so a
single canonical form is compared everywhere downstream.
"""

from __future__ import annotations

import csv
import datetime
import io
import re
from dataclasses import dataclass, field

from .errors import SchemaMismatch, UnknownColumn

SEMANTIC_TYPES = ("date", "quarter", "number", "percent", "currency", "text", "identifier")
NUMERIC_TYPES = ("number", "percent", "currency")
KEY_TYPES = ("date", "quarter")

_DATE_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_DATE_COMPACT_RE = re.compile(r"^(\d{4})(\d{2})(\d{2})$")
_DATE_SLASH_RE = re.compile(r"^(\d{4})[/.](\d{1,2})[/.](\d{1,2})$")
_QUARTER_RE = re.compile(r"^(\d{4})[-_ ]?[Qq]([1-4])$")


def normalize_date(value: str) -> str:
    """Normalize a date string to ISO-8601, raising ValueError if unparseable."""
    s = str(value).strip()
    for pattern in (_DATE_RE, _DATE_COMPACT_RE, _DATE_SLASH_RE):
        m = pattern.match(s)
        if m:
            try:
                d = datetime.date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
            except ValueError as exc:
                raise ValueError(f"invalid date: {value!r}") from exc
            return d.isoformat()
    raise ValueError(f"unparseable date: {value!r}")


def normalize_quarter(value: str) -> str:
    """Normalize a quarter label to canonical "YYYYQn"."""
    m = _QUARTER_RE.match(str(value).strip())
    if not m:
        raise ValueError(f"unparseable quarter: {value!r}")
    return f"{m.group(1)}Q{m.group(2)}"


def quarter_bounds(quarter: str) -> tuple[str, str]:
    """Return (first_day, last_day) ISO dates of a canonical quarter."""
    q = normalize_quarter(quarter)
    year, n = int(q[:4]), int(q[5])
    starts = {1: "01-01", 2: "04-01", 3: "07-01", 4: "10-01"}
    ends = {1: "03-31", 2: "06-30", 3: "09-30", 4: "12-31"}
    return f"{year}-{starts[n]}", f"{year}-{ends[n]}"


def key_sort_value(value, semantic_type: str) -> str:
    """Comparable string for a key cell: quarter keys map to their end date."""
    if value is None:
        return ""
    if semantic_type == "quarter":
        return quarter_bounds(value)[1]
    return str(value)


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    semantic_type: str
    description: str = ""
    unit: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("column name must be non-empty")
        if self.semantic_type not in SEMANTIC_TYPES:
            raise ValueError(f"unknown semantic type {self.semantic_type!r}")
        if self.unit is not None and self.semantic_type not in NUMERIC_TYPES:
            raise ValueError(f"unit only allowed on numeric columns, not {self.semantic_type}")

    def to_dict(self) -> dict:
        d = {"name": self.name, "semantic_type": self.semantic_type, "description": self.description}
        if self.unit is not None:
            d["unit"] = self.unit
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnSchema":
        return cls(
            name=d["name"],
            semantic_type=d["semantic_type"],
            description=d.get("description", ""),
            unit=d.get("unit"),
        )


def coerce_cell(raw, semantic_type: str):
    """Coerce a raw cell (usually a CSV string) into its canonical value."""
    if raw is None:
        return None
    if isinstance(raw, str) and raw.strip() == "":
        return None
    if semantic_type in NUMERIC_TYPES:
        if isinstance(raw, bool):
            raise ValueError(f"boolean cell in numeric column: {raw!r}")
        return float(raw)
    if semantic_type == "date":
        return normalize_date(raw)
    if semantic_type == "quarter":
        return normalize_quarter(raw)
    return str(raw)


def _check_cell(value, semantic_type: str) -> bool:
    if value is None:
        return True
    if semantic_type in NUMERIC_TYPES:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if semantic_type == "date":
        return isinstance(value, str) and bool(_DATE_RE.match(value))
    if semantic_type == "quarter":
        return isinstance(value, str) and bool(re.match(r"^\d{4}Q[1-4]$", value))
    return isinstance(value, str)


@dataclass
class DataTable:
    columns: list[ColumnSchema]
    values: list[list] = field(default_factory=list)

    def __post_init__(self):
        if not self.values:
            self.values = [[] for _ in self.columns]
        self.validate()

    # -- construction ------------------------------------------------------

    @classmethod
    def from_rows(cls, columns: list[ColumnSchema], rows: list[list]) -> "DataTable":
        values = [[row[i] for row in rows] for i in range(len(columns))]
        return cls(columns=columns, values=values)

    @classmethod
    def empty_like(cls, other: "DataTable") -> "DataTable":
        return cls(columns=list(other.columns))

    # -- invariants --------------------------------------------------------

    def validate(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaMismatch(f"duplicate column names: {names}")
        if len(self.values) != len(self.columns):
            raise SchemaMismatch("value arrays do not line up with columns")
        lengths = {len(col) for col in self.values}
        if len(lengths) > 1:
            raise SchemaMismatch(f"ragged columns: lengths {sorted(lengths)}")
        for schema, col in zip(self.columns, self.values):
            for v in col:
                if not _check_cell(v, schema.semantic_type):
                    raise SchemaMismatch(
                        f"cell {v!r} does not match {schema.semantic_type} in column {schema.name!r}"
                    )

    # -- basic access ------------------------------------------------------

    @property
    def row_count(self) -> int:
        return len(self.values[0]) if self.values else 0

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def schema_of(self, name: str) -> ColumnSchema:
        for c in self.columns:
            if c.name == name:
                return c
        raise UnknownColumn(name, self.column_names)

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def column(self, name: str) -> list:
        for schema, col in zip(self.columns, self.values):
            if schema.name == name:
                return col
        raise UnknownColumn(name, self.column_names)

    def row(self, i: int) -> list:
        return [col[i] for col in self.values]

    def rows(self) -> list[list]:
        return [self.row(i) for i in range(self.row_count)]

    def key_column(self) -> ColumnSchema | None:
        """The primary date/quarter key: first column of a key type, else None."""
        for c in self.columns:
            if c.semantic_type in KEY_TYPES:
                return c
        return None

    def identifier_columns(self) -> list[ColumnSchema]:
        return [c for c in self.columns if c.semantic_type == "identifier"]

    def numeric_columns(self) -> list[ColumnSchema]:
        return [c for c in self.columns if c.semantic_type in NUMERIC_TYPES]

    # -- transformations (all return new tables) ---------------------------

    def select(self, names: list[str]) -> "DataTable":
        cols = [self.schema_of(n) for n in names]
        vals = [list(self.column(n)) for n in names]
        return DataTable(columns=cols, values=vals)

    def take(self, indices: list[int]) -> "DataTable":
        vals = [[col[i] for i in indices] for col in self.values]
        return DataTable(columns=list(self.columns), values=vals)

    def filter_mask(self, mask: list[bool]) -> "DataTable":
        indices = [i for i, keep in enumerate(mask) if keep]
        return self.take(indices)

    def head(self, n: int) -> "DataTable":
        return self.take(list(range(min(n, self.row_count))))

    def sort_by(self, name: str, descending: bool = False) -> "DataTable":
        schema = self.schema_of(name)
        col = self.column(name)

        def sort_key(i: int):
            v = col[i]
            # Nulls always sink to the end regardless of direction.
            if v is None:
                return (1, 0)
            if schema.semantic_type in KEY_TYPES:
                v = key_sort_value(v, schema.semantic_type)
            if descending and isinstance(v, (int, float)):
                return (0, -v)
            return (0, v)

        indices = sorted(range(self.row_count), key=sort_key)
        if descending and schema.semantic_type not in NUMERIC_TYPES:
            non_null = [i for i in indices if col[i] is not None]
            nulls = [i for i in indices if col[i] is None]
            indices = list(reversed(non_null)) + nulls
        return self.take(indices)

    def with_column(self, schema: ColumnSchema, values: list) -> "DataTable":
        if self.has_column(schema.name):
            raise SchemaMismatch(f"column {schema.name!r} already present")
        if len(values) != self.row_count:
            raise SchemaMismatch(
                f"new column {schema.name!r} has {len(values)} rows, table has {self.row_count}"
            )
        return DataTable(columns=[*self.columns, schema], values=[*[list(c) for c in self.values], list(values)])

    def rename(self, mapping: dict[str, str]) -> "DataTable":
        cols = []
        for c in self.columns:
            if c.name in mapping:
                cols.append(ColumnSchema(mapping[c.name], c.semantic_type, c.description, c.unit))
            else:
                cols.append(c)
        return DataTable(columns=cols, values=[list(c) for c in self.values])

    @staticmethod
    def concat(tables: list["DataTable"]) -> "DataTable":
        if not tables:
            raise SchemaMismatch("cannot concat zero tables")
        first = tables[0]
        for t in tables[1:]:
            if t.column_names != first.column_names:
                raise SchemaMismatch(
                    f"concat schema mismatch: {first.column_names} vs {t.column_names}"
                )
        vals = [sum((list(t.values[i]) for t in tables), []) for i in range(len(first.columns))]
        return DataTable(columns=list(first.columns), values=vals)

    # -- equality ----------------------------------------------------------

    def equals(self, other: "DataTable") -> bool:
        """Exact equality: same column names/types, same cells in order."""
        if self.column_names != other.column_names:
            return False
        if [c.semantic_type for c in self.columns] != [c.semantic_type for c in other.columns]:
            return False
        return self.values == other.values

    # -- serialization -----------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "columns": [c.to_dict() for c in self.columns],
            "values": self.values,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DataTable":
        return cls(
            columns=[ColumnSchema.from_dict(c) for c in obj["columns"]],
            values=[list(col) for col in obj["values"]],
        )

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.column_names)
        for r in self.rows():
            writer.writerow(["" if v is None else format_cell(v) for v in r])
        return buf.getvalue()

    def render_row(self, i: int) -> str:
        return ", ".join("" if v is None else format_cell(v) for v in self.row(i))

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"DataTable({self.column_names}, rows={self.row_count})"


def format_cell(value) -> str:
    """Render a cell compactly: integral floats drop the trailing .0."""
    if value is None:
        return ""
    if isinstance(value, float) and value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return str(value)


def parse_csv_table(text: str, schema: list[ColumnSchema]) -> DataTable:
    """Parse CSV text against a declared schema, coercing cells."""
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r]
    if not rows:
        raise SchemaMismatch("CSV has no header row")
    header = [h.strip() for h in rows[0]]
    declared = [c.name for c in schema]
    if header != declared:
        raise SchemaMismatch(f"CSV header {header} does not match declared schema {declared}")
    data_rows = []
    for raw in rows[1:]:
        if len(raw) != len(schema):
            raise SchemaMismatch(f"row width {len(raw)} != {len(schema)}: {raw!r}")
        data_rows.append([coerce_cell(cell, col.semantic_type) for cell, col in zip(raw, schema)])
    return DataTable.from_rows(schema, data_rows)
