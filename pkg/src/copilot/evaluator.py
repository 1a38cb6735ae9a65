"""Deterministic evaluation: table equivalence, chart scoring, benchmarks.

Tables are compared after normalization (column order, row order by key
columns, date canonicalization, unit scaling); numeric cells agree within
a relative tolerance. Charts are scored by rule checklist over ten equal
subdimensions with a 60-point pass threshold.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .charts import CHART_TYPES, ChartSpec
from .tables import (
    ColumnSchema,
    DataTable,
    KEY_TYPES,
    format_cell,
    key_sort_value,
    normalize_date,
    normalize_quarter,
)

GRAPHICAL_FORMATS = ("line", "bar", "kline", "radar", "pie", "scatter", "area")

SUBSCORES = (
    "chart_type_match",
    "data_accuracy",
    "axis_labels",
    "legend",
    "title_relevance",
    "completeness",
    "proportion_scale",
    "color_distinctness",
    "readability",
    "relevance",
)

_UNIT_TABLE = {"trillion": 1e12, "billion": 1e9, "万": 1e4, "%": 0.01}

_STOP = frozenset("a an and by for from in of on or the to with".split())


@dataclass
class NormalizationConfig:
    float_rtol: float = 1e-6
    column_order_insensitive: bool = True
    unit_table: dict = field(default_factory=lambda: dict(_UNIT_TABLE))

    def __post_init__(self):
        if self.float_rtol <= 0:
            raise ValueError("float_rtol must be > 0")
        self.unit_table = {str(k).lower(): v for k, v in self.unit_table.items()}


@dataclass
class TableVerdict:
    equal: bool
    diffs: list[str] = field(default_factory=list)


@dataclass
class ChartScore:
    subscores: dict[str, int]
    total: int
    passed: bool

    def to_json_obj(self) -> dict:
        return {"subscores": dict(self.subscores), "total": self.total, "pass": self.passed}


def _close(a: float, b: float, rtol: float) -> bool:
    if a == b:
        return True
    return abs(a - b) <= rtol * max(abs(a), abs(b))


# -- table normalization ---------------------------------------------------

_VALUE_UNIT_RE = re.compile(r"^(-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\s*([^\s\d].*)$")


def _unit_factor(text: str, unit_table: dict) -> float | None:
    for token in re.split(r"[\s,]+", text.lower()):
        if token in unit_table:
            return unit_table[token]
    if text.lower().strip() in unit_table:
        return unit_table[text.lower().strip()]
    return None


def normalize_table(table: DataTable, cfg: NormalizationConfig) -> DataTable:
    columns = []
    for col in table.columns:
        values = list(table.column(col.name))
        semantic = col.semantic_type
        factor = _unit_factor(col.unit, cfg.unit_table) if col.unit else None
        if factor is not None:
            values = [v * factor if isinstance(v, (int, float)) and not isinstance(v, bool) else v
                      for v in values]
        converted = []
        for v in values:
            if isinstance(v, str):
                m = _VALUE_UNIT_RE.match(v.strip())
                if m:
                    f = _unit_factor(m.group(2), cfg.unit_table)
                    if f is not None:
                        converted.append(float(m.group(1)) * f)
                        continue
                if semantic == "date":
                    try:
                        converted.append(normalize_date(v))
                        continue
                    except ValueError:
                        pass
            converted.append(v)
        values = converted
        if semantic not in ("number", "percent", "currency") and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values if v is not None
        ) and any(v is not None for v in values):
            if factor is not None or any(isinstance(o, str) for o in table.column(col.name)):
                semantic = "number"
        unit = None if factor is not None else col.unit
        columns.append((ColumnSchema(col.name, semantic if semantic != "percent" or factor is None else "number",
                                     col.description, unit), values))

    if cfg.column_order_insensitive:
        columns.sort(key=lambda pair: pair[0].name)
    out = DataTable([c for c, _ in columns], [v for _, v in columns])

    key_names = [c.name for c in out.columns if c.semantic_type in KEY_TYPES]
    if key_names:
        order = sorted(
            range(out.row_count),
            key=lambda i: tuple(
                _sortable(out.column(n)[i], out.schema_of(n).semantic_type) for n in key_names
            ),
        )
        out = out.take(order)
    return out


def _sortable(value, semantic):
    if value is None:
        return (1, "")
    return (0, key_sort_value(value, semantic) if semantic in ("date", "quarter") else str(value))


def _row_key(table: DataTable, key_names: list, i: int) -> str:
    return ",".join(format_cell(table.column(n)[i]) for n in key_names)


def compare_tables(predicted: DataTable, labeled: DataTable,
                   cfg: NormalizationConfig | None = None) -> TableVerdict:
    cfg = cfg or NormalizationConfig()
    p = normalize_table(predicted, cfg)
    l = normalize_table(labeled, cfg)
    diffs: list[str] = []

    p_names, l_names = set(p.column_names), set(l.column_names)
    for name in sorted(l_names - p_names):
        diffs.append(f"missing column {name}")
    for name in sorted(p_names - l_names):
        diffs.append(f"extra column {name}")
    common = [n for n in l.column_names if n in p_names]

    def unique_in_both(names: list) -> bool:
        return all(
            len({_row_key(t, names, i) for i in range(t.row_count)}) == t.row_count
            for t in (p, l)
        )

    # Key ladder: date/quarter columns, widened with identifier columns for
    # panel tables, then any single column that keys rows uniquely.
    typed = [n for n in common if l.schema_of(n).semantic_type in KEY_TYPES]
    widened = typed + [n for n in common if l.schema_of(n).semantic_type == "identifier"]
    key_names: list = []
    for candidate in (typed, widened):
        if candidate and unique_in_both(candidate):
            key_names = candidate
            break
    if not key_names:
        for name in common:
            if unique_in_both([name]):
                key_names = [name]
                break
    if key_names:
        p_rows = {_row_key(p, key_names, i): i for i in range(p.row_count)}
        l_rows = {_row_key(l, key_names, i): i for i in range(l.row_count)}
        for key in l_rows:
            if key not in p_rows:
                diffs.append(f"missing row {key}")
        for key in p_rows:
            if key not in l_rows:
                diffs.append(f"extra row {key}")
        pairs = [(p_rows[k], l_rows[k]) for k in l_rows if k in p_rows]
    else:
        if p.row_count != l.row_count:
            diffs.append(f"row count {p.row_count} != {l.row_count}")
        pairs = [(i, i) for i in range(min(p.row_count, l.row_count))]

    for pi, li in pairs:
        for name in common:
            a = p.column(name)[pi]
            b = l.column(name)[li]
            if _cells_equal(a, b, cfg.float_rtol):
                continue
            where = _row_key(l, key_names, li) if key_names else str(li)
            diffs.append(f"row {where} col {name}: {a!r} != {b!r}")
            if len(diffs) >= 10:
                return TableVerdict(equal=False, diffs=diffs[:10])
    return TableVerdict(equal=not diffs, diffs=diffs[:10])


def _cells_equal(a, b, rtol: float) -> bool:
    if a is None or b is None:
        return a is None and b is None
    a_num = isinstance(a, (int, float)) and not isinstance(a, bool)
    b_num = isinstance(b, (int, float)) and not isinstance(b, bool)
    if a_num and b_num:
        return _close(float(a), float(b), rtol)
    return a == b


# -- chart scoring ---------------------------------------------------------


def _intent_get(intent, key, default=""):
    if intent is None:
        return default
    if isinstance(intent, dict):
        return intent.get(key, default)
    return getattr(intent, key, default)


def _content_tokens(text: str) -> set:
    return {t for t in re.findall(r"[^\W_]+", str(text).lower()) if t not in _STOP}


def score_chart(spec: ChartSpec, intent, labeled_table: DataTable | None,
                cfg: NormalizationConfig | None = None) -> ChartScore:
    cfg = cfg or NormalizationConfig()
    s: dict[str, int] = {}

    wanted = str(_intent_get(intent, "output_format", "auto"))
    s["chart_type_match"] = 10 if (wanted in ("auto", "") or spec.chart_type == wanted) else 0

    s["data_accuracy"] = _data_accuracy(spec, labeled_table, cfg)

    labels = [bool(str(spec.x_label).strip()), bool(str(spec.y_label).strip())]
    s["axis_labels"] = {2: 10, 1: 5, 0: 0}[sum(labels)]

    names = [str(x.name).strip() for x in spec.series]
    if len(spec.series) > 1:
        s["legend"] = 10 if all(names) and len(set(names)) == len(names) else 0
    elif spec.series:
        s["legend"] = 10 if names[0] else 5
    else:
        s["legend"] = 0

    title = str(spec.title).strip()
    if not title:
        s["title_relevance"] = 0
    else:
        want = _content_tokens(_intent_get(intent, "rewritten_text", "")) | set().union(
            *[_content_tokens(o) for o in (_intent_get(intent, "objects", []) or [""])]
        )
        s["title_relevance"] = 10 if not want or (_content_tokens(title) & want) else 5

    checks = [
        spec.chart_type in CHART_TYPES,
        bool(title),
        bool(str(spec.x_label).strip()),
        bool(str(spec.y_label).strip()),
        bool(spec.series),
        all(len(x.x) == len(x.y) > 0 for x in spec.series) if spec.series else False,
    ]
    s["completeness"] = round(10 * sum(checks) / len(checks))

    points = [y for x in spec.series for y in x.y]
    finite = [
        y for y in points
        if isinstance(y, (int, float)) and not isinstance(y, bool) and math.isfinite(y)
    ]
    s["proportion_scale"] = round(10 * len(finite) / len(points)) if points else 0

    colors = [str(x.color).strip() for x in spec.series]
    if not spec.series or not all(colors):
        s["color_distinctness"] = 0
    elif len(set(colors)) == len(colors):
        s["color_distinctness"] = 10
    else:
        s["color_distinctness"] = 5

    crowding = [
        len(spec.series) <= 12,
        all(len(x.x) <= 5000 for x in spec.series),
        len(title) <= 120,
    ]
    s["readability"] = max(0, 10 - 4 * crowding.count(False))

    s["relevance"] = 10 if _type_suits_data(spec) and points else 0

    total = sum(s.values())
    return ChartScore(subscores=s, total=total, passed=total >= 60)


def _data_accuracy(spec: ChartSpec, labeled: DataTable | None,
                   cfg: NormalizationConfig) -> int:
    if labeled is None:
        # nothing to compare against: full credit only for well-formed series
        return 10 if spec.series and all(len(x.x) == len(x.y) for x in spec.series) else 0
    if not spec.series:
        return 0
    # plotted values carry the table's own units; sort rows but do not rescale
    table = normalize_table(labeled, replace(cfg, unit_table={}))
    pool = {c.name: table.column(c.name) for c in table.numeric_columns()}
    fractions = []
    for series in spec.series:
        candidates = []
        if series.name in pool:
            candidates.append(pool[series.name])
        candidates.extend(v for k, v in pool.items() if k != series.name and len(v) == len(series.y))
        best = 0.0
        for cand in candidates:
            if not series.y:
                break
            n = min(len(series.y), len(cand))
            if n == 0:
                continue
            hits = sum(
                1 for i in range(n)
                if isinstance(series.y[i], (int, float)) and not isinstance(series.y[i], bool)
                and cand[i] is not None and _close(float(series.y[i]), float(cand[i]), cfg.float_rtol)
            )
            best = max(best, hits / len(series.y))
        fractions.append(best)
    return round(10 * sum(fractions) / len(fractions))


def _type_suits_data(spec: ChartSpec) -> bool:
    if spec.chart_type == "kline":
        return [x.name for x in spec.series] == ["open", "high", "low", "close"]
    if spec.chart_type == "pie":
        return all(len(x.y) <= 12 for x in spec.series)
    if spec.chart_type == "radar":
        return all(len(x.x) >= 3 for x in spec.series)
    return all(len(x.x) > 0 for x in spec.series)


# -- benchmark harness -----------------------------------------------------


@dataclass
class BenchmarkCase:
    request: str
    labeled_table: DataTable | None
    expected_format: str = "table"
    task_type: str = "other"
    complexity: str = "single"


@dataclass
class CaseResult:
    request: str
    table_verdict: TableVerdict
    chart_score: ChartScore | None
    accurate: bool
    output_tokens: int
    error: str = ""


@dataclass
class BenchmarkReport:
    mode: str
    results: list[CaseResult]
    accuracy: float
    by_task: dict
    by_complexity: dict
    token_totals: dict
    wall_time: float
    metadata: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "mode": self.mode,
            "accuracy": self.accuracy,
            "by_task": self.by_task,
            "by_complexity": self.by_complexity,
            "token_totals": self.token_totals,
            "wall_time": self.wall_time,
            "cases": [
                {
                    "request": r.request,
                    "equal": r.table_verdict.equal,
                    "diffs": r.table_verdict.diffs,
                    "chart": r.chart_score.to_json_obj() if r.chart_score else None,
                    "accurate": r.accurate,
                    "output_tokens": r.output_tokens,
                    "error": r.error,
                }
                for r in self.results
            ],
            "metadata": self.metadata,
        }


def table_from_csv_text(text: str) -> DataTable:
    """Parse labeled-case CSV, inferring column semantics from the data."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        return DataTable([], [])
    header, data = rows[0], rows[1:]
    columns = []
    for j, name in enumerate(header):
        raw = [r[j] if j < len(r) else "" for r in data]
        columns.append(_infer_column(name, raw))
    return DataTable([c for c, _ in columns], [v for _, v in columns])


def _infer_column(name: str, raw: list) -> tuple:
    cells = [c.strip() for c in raw]
    present = [c for c in cells if c != ""]

    def try_all(fn):
        out = []
        for c in cells:
            if c == "":
                out.append(None)
                continue
            try:
                out.append(fn(c))
            except ValueError:
                return None
        return out

    if present:
        # dates first: compact forms like 20190313 also parse as floats
        as_date = try_all(normalize_date)
        if as_date is not None:
            return ColumnSchema(name, "date"), as_date
        as_num = try_all(float)
        if as_num is not None:
            return ColumnSchema(name, "number"), as_num
        as_quarter = try_all(normalize_quarter)
        if as_quarter is not None:
            return ColumnSchema(name, "quarter"), as_quarter
    return ColumnSchema(name, "identifier"), [c if c != "" else None for c in cells]


def load_cases(path) -> list:
    """Read benchmark cases from a JSON Lines file.

    Each line: {request, labeled_table (inline CSV), expected_format,
    task_type?, complexity?}. A missing or empty labeled_table means the
    case has no table to check.
    """
    cases = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            csv_text = rec.get("labeled_table") or ""
            cases.append(BenchmarkCase(
                request=rec["request"],
                labeled_table=table_from_csv_text(csv_text) if csv_text else None,
                expected_format=rec.get("expected_format", "table"),
                task_type=rec.get("task_type", "other"),
                complexity=rec.get("complexity", "single"),
            ))
    return cases


def report_markdown(report: BenchmarkReport) -> str:
    lines = [
        f"# Benchmark report: {report.mode}",
        "",
        f"- cases: {len(report.results)}",
        f"- accuracy: {report.accuracy:.1%}",
        f"- output tokens: {report.token_totals.get('output_tokens', 0)}",
        f"- wall time: {report.wall_time:.2f}s",
        "",
    ]
    for title, buckets in (("By task", report.by_task), ("By complexity", report.by_complexity)):
        lines += [f"## {title}", "", "| bucket | cases | accurate | accuracy |", "| --- | --- | --- | --- |"]
        for key in sorted(buckets):
            b = buckets[key]
            lines.append(f"| {key} | {b['cases']} | {b['accurate']} | {b['accuracy']:.1%} |")
        lines.append("")
    if report.metadata:
        lines += ["## Context", ""]
        for key in sorted(report.metadata):
            lines.append(f"- {key}: {report.metadata[key]}")
        lines.append("")
    return "\n".join(lines)


def write_report(report: BenchmarkReport, out_dir, name: str) -> tuple:
    """Persist the report as <name>.json and <name>.md under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / f"{name}.json"
    md_path = out / f"{name}.md"
    json_path.write_text(
        json.dumps(report.to_json_obj(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    md_path.write_text(report_markdown(report), encoding="utf-8")
    return json_path, md_path


def run_benchmark(cases: list, mode: str, runner, cfg: NormalizationConfig | None = None,
                  parallelism: int = 1, metadata: dict | None = None) -> BenchmarkReport:
    """Run every case through `runner(request, mode) -> outcome dict`.

    The outcome dict carries: table (DataTable or None), chart (ChartSpec
    or None), intent (dict), output_tokens (int). Per-case exceptions are
    recorded, never raised.
    """
    cfg = cfg or NormalizationConfig()
    started = time.monotonic()

    def one(case: BenchmarkCase) -> CaseResult:
        try:
            outcome = runner(case.request, mode)
        except Exception as exc:
            return CaseResult(
                request=case.request,
                table_verdict=TableVerdict(equal=False, diffs=[f"run failed: {exc}"]),
                chart_score=None,
                accurate=False,
                output_tokens=0,
                error=f"{type(exc).__name__}: {exc}",
            )
        table = outcome.get("table")
        verdict = (
            compare_tables(table, case.labeled_table, cfg)
            if table is not None and case.labeled_table is not None
            else TableVerdict(equal=table is not None or case.labeled_table is None,
                              diffs=[] if table is not None or case.labeled_table is None
                              else ["no table produced"])
        )
        chart_needed = case.expected_format in GRAPHICAL_FORMATS
        chart_score = None
        if chart_needed:
            chart = outcome.get("chart")
            if chart is None:
                chart_score = ChartScore(subscores={k: 0 for k in SUBSCORES}, total=0, passed=False)
            else:
                intent = outcome.get("intent") or {"output_format": case.expected_format}
                chart_score = score_chart(chart, intent, case.labeled_table, cfg)
        accurate = verdict.equal and (not chart_needed or chart_score.passed)
        return CaseResult(
            request=case.request,
            table_verdict=verdict,
            chart_score=chart_score,
            accurate=accurate,
            output_tokens=int(outcome.get("output_tokens", 0)),
        )

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(one, cases))
    else:
        results = [one(c) for c in cases]

    def bucket(selector) -> dict:
        out: dict = {}
        for case, result in zip(cases, results):
            key = selector(case)
            slot = out.setdefault(key, {"cases": 0, "accurate": 0})
            slot["cases"] += 1
            slot["accurate"] += int(result.accurate)
        for slot in out.values():
            slot["accuracy"] = slot["accurate"] / slot["cases"]
        return out

    accuracy = sum(r.accurate for r in results) / len(results) if results else 0.0
    return BenchmarkReport(
        mode=mode,
        results=results,
        accuracy=accuracy,
        by_task=bucket(lambda c: c.task_type),
        by_complexity=bucket(lambda c: c.complexity),
        token_totals={"output_tokens": sum(r.output_tokens for r in results)},
        wall_time=time.monotonic() - started,
        metadata=metadata or {},
    )
