"""Data source catalog: registration, typed fetch, sampling, parsing files.

Sources are CSV/JSONL fixture files or HTTP providers. CSV sources are
validated and loaded eagerly at registration; HTTP sources are validated
lazily on first fetch so registration works offline. Each source can emit
a parsing file: the JSON document fed into prompts that describes the
data, its access method, the output schema, and a usage example.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateSource,
    InvalidRange,
    SchemaMismatch,
    UnknownColumn,
    UnknownSource,
    UnreadableLocator,
)
from .tables import (
    ColumnSchema,
    DataTable,
    coerce_cell,
    key_sort_value,
    normalize_date,
    normalize_quarter,
    parse_csv_table,
    quarter_bounds,
)

SOURCE_KINDS = ("csv_file", "http_provider")
TASK_TYPES = ("stock", "fund", "corporation", "other")


@dataclass
class DataSource:
    id: str
    kind: str
    locator: str
    task_tags: frozenset[str]
    schema: list[ColumnSchema]
    status: str = "unverified"
    description: str = ""

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")
        if not self.task_tags:
            raise ValueError("task_tags must be non-empty")
        names = [c.name for c in self.schema]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate schema columns: {names}")
        self.task_tags = frozenset(self.task_tags)


@dataclass
class ParsingFile:
    source_id: str
    description: str
    access_method: str
    output_schema: list[dict]
    usage_example: str
    first_row: str
    last_row: str

    def to_json_obj(self) -> dict:
        return {
            "source_id": self.source_id,
            "description": self.description,
            "access_method": self.access_method,
            "output_schema": self.output_schema,
            "usage_example": self.usage_example,
            "first_row": self.first_row,
            "last_row": self.last_row,
        }

    def to_prompt_text(self) -> str:
        """Compact rendering used inside synthesis/design prompts."""
        schema = ", ".join(f"{c['name']}: {c['description']}" for c in self.output_schema)
        return (
            f"parsing file for {self.source_id}:{{\n"
            f"  Description: {self.description}\n"
            f"  Access Method: {self.access_method}\n"
            f"  Output Schema: {schema}\n"
            f"  Usage: {{ Example: {self.usage_example}, "
            f"First Row: {{{self.first_row}}}, Last Row: {{{self.last_row}}} }}\n"
            f"}}"
        )


@dataclass
class FetchQuery:
    time_range: tuple[str | None, str | None] | None = None
    filters: dict[str, object] = field(default_factory=dict)
    columns: list[str] | None = None
    frequency: str | None = None


def _normalize_bound(value: str | None, end: bool) -> str | None:
    """Canonicalize a range bound: quarters widen to their first/last day."""
    if value is None or value == "":
        return None
    s = str(value).strip()
    try:
        return normalize_date(s)
    except ValueError:
        pass
    q = normalize_quarter(s)  # raises ValueError if neither form
    lo, hi = quarter_bounds(q)
    return hi if end else lo


_PERIOD_SLICERS = {
    "day": lambda d: d,
    "daily": lambda d: d,
    "week": lambda d: _iso_week(d),
    "weekly": lambda d: _iso_week(d),
    "month": lambda d: d[:7],
    "monthly": lambda d: d[:7],
    "quarter": lambda d: f"{d[:4]}Q{(int(d[5:7]) + 2) // 3}",
    "quarterly": lambda d: f"{d[:4]}Q{(int(d[5:7]) + 2) // 3}",
    "year": lambda d: d[:4],
    "annual": lambda d: d[:4],
    "yearly": lambda d: d[:4],
}


def _iso_week(iso_date: str) -> str:
    import datetime

    d = datetime.date.fromisoformat(iso_date)
    year, week, _ = d.isocalendar()
    return f"{year}W{week:02d}"


class Catalog:
    """Registry of data sources with read-mostly concurrency.

    Reads (fetch, sample, parsing files) take no lock once a source is
    loaded; registration holds the writer lock.
    """

    def __init__(self, base_dir: str | Path | None = None, http_client=None):
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self._sources: dict[str, DataSource] = {}
        self._tables: dict[str, DataTable] = {}
        self._write_lock = threading.Lock()
        self._http_client = http_client

    # -- registration ------------------------------------------------------

    def register_source(self, descriptor: DataSource) -> str:
        with self._write_lock:
            if descriptor.id in self._sources:
                raise DuplicateSource(f"source {descriptor.id!r} already registered")
            if descriptor.kind == "csv_file":
                table = self._load_file(descriptor)
                descriptor.status = "verified"
                self._tables[descriptor.id] = table
            self._sources[descriptor.id] = descriptor
            return descriptor.id

    def _load_file(self, descriptor: DataSource) -> DataTable:
        path = Path(descriptor.locator)
        if not path.is_absolute():
            path = self.base_dir / path
        if not path.exists():
            raise UnreadableLocator(f"cannot read {path}")
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise UnreadableLocator(f"cannot read {path}: {exc}") from exc
        if path.suffix == ".jsonl":
            return _parse_jsonl_table(text, descriptor.schema)
        return parse_csv_table(text, descriptor.schema)

    # -- lookup ------------------------------------------------------------

    def source(self, source_id: str) -> DataSource:
        try:
            return self._sources[source_id]
        except KeyError:
            raise UnknownSource(f"unknown source {source_id!r}") from None

    def source_ids(self) -> list[str]:
        return sorted(self._sources)

    def sources_for_task(self, task: str) -> list[DataSource]:
        return [self._sources[i] for i in self.source_ids() if task in self._sources[i].task_tags]

    def table(self, source_id: str) -> DataTable:
        src = self.source(source_id)
        if source_id not in self._tables:
            if src.kind == "http_provider":
                self._tables[source_id] = self._fetch_http(src)
                src.status = "verified"
            else:  # pragma: no cover - registration loads csv eagerly
                self._tables[source_id] = self._load_file(src)
        return self._tables[source_id]

    def _fetch_http(self, src: DataSource) -> DataTable:
        import httpx

        client = self._http_client or httpx
        try:
            resp = client.get(src.locator, timeout=10.0)
        except Exception as exc:
            raise UnreadableLocator(f"http source {src.id} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise UnreadableLocator(f"http source {src.id} returned {resp.status_code}")
        payload = resp.json()
        names = payload.get("columns", [])
        declared = [c.name for c in src.schema]
        if names != declared:
            raise SchemaMismatch(f"http columns {names} do not match declared {declared}")
        rows = [
            [coerce_cell(cell, col.semantic_type) for cell, col in zip(row, src.schema)]
            for row in payload.get("rows", [])
        ]
        return DataTable.from_rows(src.schema, rows)

    # -- fetch -------------------------------------------------------------

    def fetch(self, source_id: str, query: FetchQuery | None = None) -> DataTable:
        query = query or FetchQuery()
        src = self.source(source_id)
        table = self.table(source_id)

        requested = query.columns or table.column_names
        for name in requested:
            if not table.has_column(name):
                raise UnknownColumn(name, table.column_names)

        key = table.key_column()
        indices = list(range(table.row_count))

        if query.time_range is not None and key is not None:
            start = _normalize_bound(query.time_range[0], end=False)
            end = _normalize_bound(query.time_range[1], end=True)
            if start is not None and end is not None and start > end:
                raise InvalidRange(f"start {start} > end {end}")
            key_vals = table.column(key.name)
            kept = []
            for i in indices:
                v = key_sort_value(key_vals[i], key.semantic_type)
                if start is not None and v < start:
                    continue
                if end is not None and v > end:
                    continue
                kept.append(i)
            indices = kept

        for col_name, wanted in (query.filters or {}).items():
            if not table.has_column(col_name):
                raise UnknownColumn(col_name, table.column_names)
            col = table.column(col_name)
            if isinstance(wanted, (list, tuple, set, frozenset)):
                allowed = set(wanted)
                indices = [i for i in indices if col[i] in allowed]
            else:
                indices = [i for i in indices if col[i] == wanted]

        result = table.take(indices)
        if key is not None:
            result = result.sort_by(key.name)
            if query.frequency:
                result = _resample(result, key, query.frequency)
        return result.select(requested)

    # -- sampling ----------------------------------------------------------

    def sample_subtable(self, source_id: str, rows: int, cols: int, seed: int) -> DataTable:
        if rows < 1 or cols < 1:
            raise ValueError("rows and cols must be >= 1")
        table = self.table(self.source(source_id).id)
        rng = random.Random(seed)
        k = min(rows, table.row_count)
        m = min(cols, len(table.columns))
        row_idx = sorted(rng.sample(range(table.row_count), k)) if table.row_count else []
        col_idx = sorted(rng.sample(range(len(table.columns)), m))
        names = [table.columns[i].name for i in col_idx]
        return table.take(row_idx).select(names)

    # -- parsing files -----------------------------------------------------

    def generate_parsing_file(self, source_id: str) -> ParsingFile:
        src = self.source(source_id)
        table = self.table(source_id) if src.kind == "csv_file" or source_id in self._tables else None
        key = table.key_column() if table is not None else None
        key_name = key.name if key else (src.schema[0].name if src.schema else "key")
        example_start, example_end = _example_range_for(src)
        access = (
            f'fetch("{src.id}", start="{example_start}", end="{example_end}", '
            f'filters={{...}}, columns=[...], frequency=...)'
        )
        usage = f'fetch("{src.id}", start="{example_start}", end="{example_end}")'
        out_schema = [
            {"name": c.name, "description": c.description or c.semantic_type}
            for c in src.schema
        ]
        if table is not None and table.row_count > 0:
            sorted_table = table.sort_by(key_name) if key else table
            first_row = sorted_table.render_row(0)
            last_row = sorted_table.render_row(sorted_table.row_count - 1)
        else:
            first_row = last_row = "<empty>"
        description = src.description or (
            f"Tabular data source {src.id} with columns " + ", ".join(c.name for c in src.schema)
        )
        return ParsingFile(
            source_id=src.id,
            description=description,
            access_method=access,
            output_schema=out_schema,
            usage_example=usage,
            first_row=first_row,
            last_row=last_row,
        )

    def write_parsing_files(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for sid in self.source_ids():
            pf = self.generate_parsing_file(sid)
            path = out / f"{sid}.json"
            path.write_text(
                json.dumps(pf.to_json_obj(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            written.append(path)
        return written


def _example_range_for(src: DataSource) -> tuple[str, str]:
    key = next((c for c in src.schema if c.semantic_type in ("date", "quarter")), None)
    if key is not None and key.semantic_type == "quarter":
        return "2018Q1", "2019Q3"
    return "2018-01-01", "2019-09-30"


def _resample(table: DataTable, key: ColumnSchema, frequency: str) -> DataTable:
    """Keep the last row per (period, identifier-group), preserving order."""
    freq = frequency.lower()
    if key.semantic_type == "quarter":
        if freq in ("quarter", "quarterly", None, ""):
            return table
        if freq in ("year", "annual", "yearly"):
            keep = [i for i, q in enumerate(table.column(key.name)) if q and q.endswith("Q4")]
            return table.take(keep)
        return table
    slicer = _PERIOD_SLICERS.get(freq)
    if slicer is None or freq in ("day", "daily"):
        return table
    ident_names = [c.name for c in table.identifier_columns()]
    key_vals = table.column(key.name)
    last_for_bucket: dict[tuple, int] = {}
    for i in range(table.row_count):
        ident = tuple(table.column(n)[i] for n in ident_names)
        bucket = (ident, slicer(key_vals[i]) if key_vals[i] else None)
        last_for_bucket[bucket] = i
    keep = sorted(last_for_bucket.values())
    return table.take(keep)


def _parse_jsonl_table(text: str, schema: list[ColumnSchema]) -> DataTable:
    declared = [c.name for c in schema]
    rows = []
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"bad JSONL at line {line_no}: {exc}") from exc
        missing = [n for n in declared if n not in obj]
        if missing:
            raise SchemaMismatch(f"JSONL line {line_no} missing fields {missing}")
        rows.append([coerce_cell(obj[c.name], c.semantic_type) for c in schema])
    return DataTable.from_rows(schema, rows)
