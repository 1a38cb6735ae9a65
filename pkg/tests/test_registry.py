"""Library journal, hierarchical lookup, uncovered log, snapshot round-trip."""

import pytest

from copilot.catalog import TASK_TYPES
from copilot.errors import DuplicateName, NotFound, NotTested
from copilot.registry import (
    CATEGORIES,
    InterfaceRecord,
    Registry,
    TestCase,
    UncoveredEntry,
)
from copilot.tables import ColumnSchema, DataTable


def record(id, name, category="data_acquisition", tags=("stock",), state="tested",
           body="t = fetch(\"stock.daily\", range(start, end))\nreturn t"):
    return InterfaceRecord(
        id=id,
        name=name,
        params=[{"name": "start", "semantic_type": "date", "description": "first day"},
                {"name": "end", "semantic_type": "date", "description": "last day"}],
        description=f"{name} over a date window",
        category=category,
        task_tags=frozenset(tags),
        body=body,
        state=state,
    )


def small_case(id):
    t = DataTable([ColumnSchema("k", "identifier")], [["a"]])
    return TestCase(id=id, request_text="sample", input_bindings={"start": "x"},
                    expected=t, status="pass", provenance={"source": "stock.daily"})


# -- insert and lookup ------------------------------------------------------


def test_insert_then_lookup(tmp_path):
    reg = Registry(tmp_path)
    reg.insert(record("i-1", "get_prices"))
    found = reg.hierarchical_lookup(["stock"], ["data_acquisition"])
    assert [r.id for r in found] == ["i-1"]


def test_insert_requires_tested(tmp_path):
    reg = Registry(tmp_path)
    with pytest.raises(NotTested):
        reg.insert(record("i-1", "get_prices", state="draft"))


def test_duplicate_name_rejected(tmp_path):
    reg = Registry(tmp_path)
    reg.insert(record("i-1", "get_prices"))
    with pytest.raises(DuplicateName):
        reg.insert(record("i-2", "get_prices"))


def test_name_reusable_after_retirement(tmp_path):
    reg = Registry(tmp_path)
    reg.insert(record("i-1", "get_prices"))
    reg.retire("i-1")
    reg.insert(record("i-2", "get_prices"))
    assert reg.by_name("get_prices").id == "i-2"


def test_empty_operation_types_widens(tmp_path):
    reg = Registry(tmp_path)
    reg.insert(record("i-1", "get_prices", category="data_acquisition"))
    reg.insert(record("i-2", "plot_prices", category="visualization"))
    assert len(reg.hierarchical_lookup(["stock"])) == 2
    assert len(reg.hierarchical_lookup(["stock"], ["visualization"])) == 1


def test_lookup_by_task_tag_intersection(tmp_path):
    reg = Registry(tmp_path)
    reg.insert(record("i-1", "get_financials", tags=("corporation", "stock")))
    reg.insert(record("i-2", "get_nav", tags=("fund",)))
    assert [r.id for r in reg.hierarchical_lookup(["corporation"])] == ["i-1"]
    assert [r.id for r in reg.hierarchical_lookup(["fund"])] == ["i-2"]
    assert len(reg.hierarchical_lookup(["stock", "fund"])) == 2


def test_lookup_completeness(tmp_path):
    # union over every (task, category) cell is exactly the active set
    reg = Registry(tmp_path)
    for i, (cat, tags) in enumerate([
        ("data_acquisition", ("stock",)),
        ("index_calculation", ("fund",)),
        ("visualization", ("stock", "fund", "corporation", "other")),
        ("general_processing", ("other",)),
    ]):
        reg.insert(record(f"i-{i}", f"op_{i}", category=cat, tags=tags))
    reg.retire("i-3")
    union = set()
    for task in TASK_TYPES:
        for cat in CATEGORIES:
            union |= {r.id for r in reg.hierarchical_lookup([task], [cat])}
    assert union == {r.id for r in reg.active_records()}


def test_any_cell_is_strict_subset_of_synthetic_library(tmp_path):
    reg = Registry(tmp_path)
    for i in range(73):
        reg.insert(record(
            f"i-{i:03d}", f"op_{i:03d}",
            category=CATEGORIES[i % len(CATEGORIES)],
            tags=(TASK_TYPES[i % len(TASK_TYPES)],),
        ))
    full = {r.id for r in reg.active_records()}
    assert len(full) == 73
    for task in TASK_TYPES:
        for cat in CATEGORIES:
            cell = {r.id for r in reg.hierarchical_lookup([task], [cat])}
            assert cell < full


# -- retirement and merge ---------------------------------------------------


def test_retired_invocable_by_id_but_not_retrieved(tmp_path):
    reg = Registry(tmp_path)
    reg.insert(record("i-1", "get_prices"))
    reg.retire("i-1")
    assert reg.get("i-1").state == "retired"
    assert reg.hierarchical_lookup(["stock"]) == []


def test_merge_drops_originals_from_every_cell(tmp_path):
    reg = Registry(tmp_path)
    reg.insert(record("i-1", "query_a", category="data_acquisition", tags=("other",)))
    reg.insert(record("i-2", "query_b", category="data_acquisition", tags=("other",)))
    merged = record("i-3", "query_ab", category="data_acquisition", tags=("other",))
    reg.record_merge(merged, ["i-1", "i-2"])
    ids = {r.id for r in reg.hierarchical_lookup(["other"])}
    assert ids == {"i-3"}
    assert reg.get("i-1").state == "merged"
    assert reg.get("i-1").merged_into == "i-3"
    assert reg.get("i-2").merged_into == "i-3"


def test_get_unknown_id(tmp_path):
    with pytest.raises(NotFound):
        Registry(tmp_path).get("i-404")


# -- uncovered log ----------------------------------------------------------


def test_logged_entry_open_and_retrievable(tmp_path):
    reg = Registry(tmp_path)
    reg.log_uncovered("draw a radar chart", "no radar interface", timestamp="2019-03-13")
    entries = reg.uncovered_entries("open")
    assert len(entries) == 1
    assert entries[0].failure_reason == "no radar interface"


def test_due_at_threshold(tmp_path):
    reg = Registry(tmp_path, uncovered_trigger=20)
    for i in range(19):
        reg.log_uncovered(f"request {i}", "gap")
    assert not reg.re_exploration_due()
    reg.log_uncovered("request 19", "gap")
    assert reg.re_exploration_due()


def test_resolution_references_tested_interface(tmp_path):
    reg = Registry(tmp_path)
    reg.log_uncovered("draw a radar chart", "no radar interface")
    reg.insert(record("i-9", "plot_radar", category="visualization"))
    reg.resolve_uncovered("draw a radar chart", "i-9")
    assert reg.uncovered_entries("open") == []
    entry = reg.uncovered_entries("resolved")[0]
    assert entry.interface_id == "i-9"
    assert not reg.re_exploration_due()


def test_resolution_rejects_retired_interface(tmp_path):
    reg = Registry(tmp_path)
    reg.log_uncovered("plot something", "gap")
    reg.insert(record("i-1", "plot_it", category="visualization"))
    reg.retire("i-1")
    with pytest.raises(NotTested):
        reg.resolve_uncovered("plot something", "i-1")


# -- persistence ------------------------------------------------------------


def test_journal_replay_reconstructs_state(tmp_path):
    reg = Registry(tmp_path)
    reg.insert(record("i-1", "query_a", tags=("other",)), cases=[small_case("c-1")])
    reg.insert(record("i-2", "query_b", tags=("other",)))
    reg.record_merge(record("i-3", "query_ab", tags=("other",)), ["i-1", "i-2"])
    reg.log_uncovered("radar please", "gap", timestamp="2019-03-13")

    fresh = Registry(tmp_path)
    assert {r.id for r in fresh.active_records()} == {"i-3"}
    assert fresh.get("i-1").merged_into == "i-3"
    assert fresh.case("c-1").expected.row_count == 1
    assert len(fresh.uncovered_entries("open")) == 1


def test_snapshot_round_trip_byte_identical(tmp_path):
    reg = Registry(tmp_path / "a")
    reg.insert(record("i-1", "query_a", tags=("other",)), cases=[small_case("c-1")])
    reg.insert(record("i-2", "plot_a", category="visualization"))
    first = reg.export_snapshot(created_at="2019-03-13")

    other = Registry(tmp_path / "b")
    other.import_snapshot(first)
    second = other.export_snapshot()
    assert first.read_bytes() == second.read_bytes()
    assert first.name == "snapshot-v1.json"
    assert second.name == "snapshot-v1.json"


def test_snapshot_versions_increment(tmp_path):
    reg = Registry(tmp_path)
    reg.insert(record("i-1", "query_a"))
    assert reg.export_snapshot().name == "snapshot-v1.json"
    assert reg.export_snapshot().name == "snapshot-v2.json"
    assert reg.next_snapshot_version() == 3


def test_category_counts(tmp_path):
    reg = Registry(tmp_path)
    reg.insert(record("i-1", "a", category="data_acquisition"))
    reg.insert(record("i-2", "b", category="visualization"))
    reg.insert(record("i-3", "c", category="visualization"))
    counts = reg.category_counts()
    assert counts["visualization"] == 2
    assert counts["data_acquisition"] == 1
    assert sum(counts.values()) == 3


def test_record_validation():
    with pytest.raises(ValueError):
        record("i-1", "x", category="mystery")
    with pytest.raises(ValueError):
        record("i-1", "x", tags=("plasma",))
    assert record("i-1", "x").signature() == "x(start, end)"


def test_uncovered_entry_serialization():
    entry = UncoveredEntry("r", "2019-03-13", "gap", "resolved", "i-1")
    obj = entry.to_json_obj()
    assert obj["resolution"] == "resolved"
    assert obj["interface_id"] == "i-1"
