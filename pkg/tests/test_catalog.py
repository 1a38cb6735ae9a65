"""Catalog registration, fetch semantics, sampling, parsing files.

Expected values are derived from the raw fixture files with the stdlib
csv module, independent of the table parsing code under test. A few spot
values are frozen inline as anchors.
"""

import csv
import json

import pytest

from copilot.catalog import Catalog, DataSource, FetchQuery
from copilot.errors import (
    DuplicateSource,
    InvalidRange,
    SchemaMismatch,
    UnknownColumn,
    UnknownSource,
    UnreadableLocator,
)
from copilot.tables import ColumnSchema


def raw_rows(root, name):
    with open(root / "fixtures" / name, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# -- registration ----------------------------------------------------------


def test_duplicate_registration_rejected(root):
    cat = Catalog(base_dir=root)
    src = DataSource(
        id="econ.gdp",
        kind="csv_file",
        locator="fixtures/gdp.csv",
        task_tags={"other"},
        schema=[
            ColumnSchema("quarter", "quarter"),
            ColumnSchema("country", "identifier"),
            ColumnSchema("gdp", "currency", unit="billion CNY"),
            ColumnSchema("gdp_yoy", "percent", unit="%"),
        ],
    )
    cat.register_source(src)
    with pytest.raises(DuplicateSource):
        cat.register_source(src)


def test_missing_file_rejected(root):
    cat = Catalog(base_dir=root)
    with pytest.raises(UnreadableLocator):
        cat.register_source(
            DataSource(
                id="x.missing",
                kind="csv_file",
                locator="fixtures/nope.csv",
                task_tags={"other"},
                schema=[ColumnSchema("a", "number")],
            )
        )


def test_header_schema_mismatch_rejected(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n", encoding="utf-8")
    cat = Catalog(base_dir=tmp_path)
    with pytest.raises(SchemaMismatch):
        cat.register_source(
            DataSource(
                id="x.bad",
                kind="csv_file",
                locator="bad.csv",
                task_tags={"other"},
                schema=[ColumnSchema("a", "number"), ColumnSchema("c", "number")],
            )
        )


def test_unknown_source(catalog):
    with pytest.raises(UnknownSource):
        catalog.fetch("econ.nope")


def test_task_tag_lookup(catalog):
    stock_ids = [s.id for s in catalog.sources_for_task("stock")]
    assert stock_ids == ["corp.financials", "stock.daily"]


# -- fetch -----------------------------------------------------------------


def test_full_fetch_matches_raw_row_count(root, catalog):
    expected = raw_rows(root, "gdp.csv")
    t = catalog.fetch("econ.gdp")
    assert t.row_count == len(expected)
    assert t.column_names == list(expected[0].keys())


def test_unknown_column_lists_valid_names(catalog):
    with pytest.raises(UnknownColumn) as err:
        catalog.fetch("econ.gdp", FetchQuery(columns=["quarter", "gdppp"]))
    assert "gdppp" in str(err.value)
    assert "gdp_yoy" in str(err.value)


def test_unknown_filter_column(catalog):
    with pytest.raises(UnknownColumn):
        catalog.fetch("econ.gdp", FetchQuery(filters={"region": "China"}))


def test_inverted_range(catalog):
    with pytest.raises(InvalidRange):
        catalog.fetch("econ.gdp", FetchQuery(time_range=("2020Q1", "2019Q1")))


def test_empty_range_keeps_schema(catalog):
    t = catalog.fetch("econ.gdp", FetchQuery(time_range=("2031Q1", "2031Q4")))
    assert t.row_count == 0
    assert t.column_names == ["quarter", "country", "gdp", "gdp_yoy"]


def test_annual_frequency_on_quarter_key(root, catalog):
    t = catalog.fetch(
        "econ.gdp",
        FetchQuery(
            time_range=("2019Q1", "2023Q4"),
            filters={"country": "China"},
            frequency="annual",
        ),
    )
    oracle = [
        r
        for r in raw_rows(root, "gdp.csv")
        if r["country"] == "China" and "2019" <= r["quarter"][:4] <= "2023" and r["quarter"].endswith("Q4")
    ]
    assert t.row_count == len(oracle) == 5
    assert t.column("quarter") == [r["quarter"] for r in oracle]
    assert t.column("gdp") == [float(r["gdp"]) for r in oracle]
    # frozen anchor
    assert t.row(0)[:3] == ["2019Q4", "China", 25346.5]


def test_compact_date_range_filter(root, catalog):
    t = catalog.fetch(
        "stock.daily",
        FetchQuery(time_range=("20180123", "20190313"), filters={"ticker": "Guizhou Maotai"}),
    )
    oracle = [
        r
        for r in raw_rows(root, "stocks_daily.csv")
        if r["ticker"] == "Guizhou Maotai" and "2018-01-23" <= r["date"] <= "2019-03-13"
    ]
    assert t.row_count == len(oracle)
    assert t.column("date")[0] == "2018-01-23"
    assert t.column("date")[-1] == "2019-03-13"
    assert t.column("close") == [float(r["close"]) for r in oracle]


def test_monthly_resample_keeps_last_row_per_month(root, catalog):
    t = catalog.fetch(
        "stock.daily",
        FetchQuery(
            time_range=("2019-01-01", "2019-06-30"),
            filters={"ticker": "CSI 300"},
            frequency="month",
        ),
    )
    by_month = {}
    for r in raw_rows(root, "stocks_daily.csv"):
        if r["ticker"] == "CSI 300" and "2019-01-01" <= r["date"] <= "2019-06-30":
            by_month[r["date"][:7]] = r  # reader is date-ordered, last wins
    assert t.row_count == 6
    assert t.column("date") == [by_month[m]["date"] for m in sorted(by_month)]


def test_filter_accepts_value_list(catalog):
    t = catalog.fetch(
        "stock.daily",
        FetchQuery(time_range=("2019-03-13", "2019-03-13"), filters={"ticker": ["CSI 300", "CSI 1000"]}),
    )
    assert sorted(t.column("ticker")) == ["CSI 1000", "CSI 300"]


def test_column_projection(catalog):
    t = catalog.fetch("econ.cpi", FetchQuery(columns=["date", "cpi"], filters={"country": "China"}))
    assert t.column_names == ["date", "cpi"]


def test_jsonl_source_loads(root, catalog):
    t = catalog.fetch("news.live")
    with open(root / "fixtures" / "news.jsonl", encoding="utf-8") as fh:
        lines = [json.loads(l) for l in fh if l.strip()]
    assert t.row_count == len(lines) == 40
    assert t.column("title")[0] == lines[0]["title"]


# -- sampling --------------------------------------------------------------


def test_sample_is_deterministic_per_seed(catalog):
    a = catalog.sample_subtable("stock.daily", rows=5, cols=4, seed=11)
    b = catalog.sample_subtable("stock.daily", rows=5, cols=4, seed=11)
    c = catalog.sample_subtable("stock.daily", rows=5, cols=4, seed=12)
    assert a.equals(b)
    assert not a.equals(c)
    assert a.row_count == 5 and len(a.columns) == 4


def test_sample_preserves_source_order(catalog):
    s = catalog.sample_subtable("econ.gdp", rows=8, cols=4, seed=3)
    full = catalog.fetch("econ.gdp")
    quarters = s.column("quarter")
    countries = s.column("country")
    positions = []
    for q, ctry in zip(quarters, countries):
        positions.append(
            next(
                i
                for i in range(full.row_count)
                if full.column("quarter")[i] == q and full.column("country")[i] == ctry
            )
        )
    assert positions == sorted(positions)
    assert s.column_names == [n for n in full.column_names if n in s.column_names]


def test_sample_caps_at_table_size(catalog):
    s = catalog.sample_subtable("news.live", rows=999, cols=99, seed=1)
    assert s.row_count == 40 and len(s.columns) == 4


# -- parsing files ---------------------------------------------------------


def test_parsing_file_fields(catalog):
    pf = catalog.generate_parsing_file("econ.gdp")
    assert pf.source_id == "econ.gdp"
    assert 'fetch("econ.gdp"' in pf.access_method
    assert [c["name"] for c in pf.output_schema] == ["quarter", "country", "gdp", "gdp_yoy"]
    assert pf.first_row.startswith("2018Q1")
    assert pf.last_row.startswith("2024Q4")
    text = pf.to_prompt_text()
    assert "Access Method" in text and "First Row" in text


def test_parsing_files_written_per_source(catalog, tmp_path):
    written = catalog.write_parsing_files(tmp_path)
    assert sorted(p.stem for p in written) == catalog.source_ids()
    payload = json.loads((tmp_path / "econ.gdp.json").read_text(encoding="utf-8"))
    assert payload["source_id"] == "econ.gdp"
    assert payload["usage_example"].startswith('fetch("econ.gdp"')
