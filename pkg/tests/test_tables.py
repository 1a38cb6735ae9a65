"""Core table type: schema validation, normalization, transforms."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from copilot.errors import SchemaMismatch
from copilot.tables import (
    ColumnSchema,
    DataTable,
    format_cell,
    key_sort_value,
    normalize_date,
    normalize_quarter,
    parse_csv_table,
    quarter_bounds,
)

SCHEMA = [
    ColumnSchema("date", "date", "trading day"),
    ColumnSchema("ticker", "identifier", "name"),
    ColumnSchema("close", "currency", "closing price", unit="CNY"),
]

ROWS = [
    ["2019-03-13", "A", 10.0],
    ["2019-03-11", "B", 12.5],
    ["2019-03-12", "A", None],
]


def make_table():
    return DataTable.from_rows(SCHEMA, [list(r) for r in ROWS])


# -- normalization ---------------------------------------------------------


def test_normalize_date_accepts_three_forms():
    assert normalize_date("2019-03-13") == "2019-03-13"
    assert normalize_date("20190313") == "2019-03-13"
    assert normalize_date("2019/3/13") == "2019-03-13"


def test_normalize_date_rejects_garbage():
    for bad in ("2019-13-01", "201903", "next tuesday", ""):
        with pytest.raises(ValueError):
            normalize_date(bad)


def test_normalize_quarter_forms():
    assert normalize_quarter("2018Q1") == "2018Q1"
    assert normalize_quarter("2018-Q1") == "2018Q1"
    assert normalize_quarter("2018q1") == "2018Q1"
    with pytest.raises(ValueError):
        normalize_quarter("2018Q5")


def test_quarter_bounds():
    assert quarter_bounds("2018Q1") == ("2018-01-01", "2018-03-31")
    assert quarter_bounds("2020Q2") == ("2020-04-01", "2020-06-30")
    assert quarter_bounds("2019Q4") == ("2019-10-01", "2019-12-31")


def test_quarter_sorts_by_end_date_against_dates():
    # 2019Q1 ends 2019-03-31, after 2019-03-13 but before 2019-04-01
    q = key_sort_value("2019Q1", "quarter")
    assert key_sort_value("2019-03-13", "date") < q < key_sort_value("2019-04-01", "date")


# -- schema validation -----------------------------------------------------


def test_unit_only_on_numeric_columns():
    with pytest.raises(ValueError):
        ColumnSchema("name", "text", unit="CNY")


def test_duplicate_column_names_rejected():
    with pytest.raises(SchemaMismatch):
        DataTable([SCHEMA[0], SCHEMA[0]], [[], []])


def test_ragged_columns_rejected():
    with pytest.raises(SchemaMismatch):
        DataTable(SCHEMA, [["2019-01-01"], [], []])


def test_cell_type_enforced():
    with pytest.raises(SchemaMismatch):
        DataTable.from_rows(SCHEMA, [["2019-01-01", "A", "not a number"]])


# -- transforms ------------------------------------------------------------


def test_sort_by_key_ascending_nulls_sink():
    t = make_table().with_column(ColumnSchema("score", "number"), [3.0, None, 1.0])
    s = t.sort_by("score")
    assert s.column("score") == [1.0, 3.0, None]
    s = t.sort_by("score", descending=True)
    assert s.column("score") == [3.0, 1.0, None]


def test_sort_is_stable_on_ties():
    t = make_table()
    s = t.sort_by("ticker")
    # the two A rows keep their original relative order
    assert s.column("date") == ["2019-03-13", "2019-03-12", "2019-03-11"]


def test_select_take_filter():
    t = make_table()
    assert t.select(["close", "date"]).column_names == ["close", "date"]
    assert t.take([2, 0]).column("ticker") == ["A", "A"]
    mask = [v == "A" for v in t.column("ticker")]
    assert t.filter_mask(mask).row_count == 2


def test_key_column_is_first_temporal():
    assert make_table().key_column().name == "date"
    bare = DataTable.from_rows([SCHEMA[1]], [["A"]])
    assert bare.key_column() is None


def test_concat_requires_same_schema():
    t = make_table()
    assert DataTable.concat([t, t]).row_count == 6
    other = t.rename({"close": "price"})
    with pytest.raises(SchemaMismatch):
        DataTable.concat([t, other])


def test_equals_is_exact():
    t = make_table()
    assert t.equals(make_table())
    assert not t.equals(t.take([0, 1]))
    bumped = make_table()
    bumped.values[2][0] = 10.000001
    assert not t.equals(bumped)


# -- serialization ---------------------------------------------------------


def test_json_round_trip():
    t = make_table()
    again = DataTable.from_json_obj(json.loads(json.dumps(t.to_json_obj())))
    assert t.equals(again)
    assert [c.to_dict() for c in again.columns] == [c.to_dict() for c in t.columns]


def test_csv_round_trip_preserves_nulls():
    t = make_table()
    again = parse_csv_table(t.to_csv_text(), SCHEMA)
    assert t.equals(again)
    assert again.column("close")[2] is None


def test_csv_header_must_match_schema():
    with pytest.raises(SchemaMismatch):
        parse_csv_table("date,name,close\n", SCHEMA)


def test_format_cell_drops_integral_suffix():
    assert format_cell(5.0) == "5"
    assert format_cell(5.25) == "5.25"
    assert format_cell(None) == ""
    assert format_cell("x") == "x"


# -- properties ------------------------------------------------------------


@given(st.lists(st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False)), max_size=30))
def test_sort_permutes_and_orders(values):
    t = DataTable([ColumnSchema("v", "number")], [list(values)])
    s = t.sort_by("v")
    present = [v for v in s.column("v") if v is not None]
    assert present == sorted(present)
    assert sorted(map(repr, s.column("v"))) == sorted(map(repr, values))


@given(st.integers(0, 5), st.integers(0, 5))
def test_concat_row_counts_add(n, m):
    col = ColumnSchema("v", "number")
    a = DataTable([col], [[float(i) for i in range(n)]])
    b = DataTable([col], [[float(i) for i in range(m)]])
    assert DataTable.concat([a, b]).row_count == n + m
