"""Interface library: journaled persistence, hierarchical lookup, uncovered log.

The library is rebuilt by replaying library/journal.jsonl (one event per
line); snapshots compact the same state into a single importable document.
Retired and merged records stay addressable by id for old plans but never
appear in retrieval results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .catalog import TASK_TYPES
from .errors import DuplicateName, NotFound, NotTested
from .tables import DataTable

CATEGORIES = (
    "data_acquisition",
    "index_calculation",
    "table_manipulation",
    "visualization",
    "general_processing",
)

STATES = ("draft", "tested", "retired", "merged")


@dataclass(frozen=True)
class Taxonomy:
    task_axis: tuple = TASK_TYPES
    operation_axis: tuple = CATEGORIES


@dataclass
class InterfaceRecord:
    id: str
    name: str
    params: list  # [{name, semantic_type, description}]
    description: str
    category: str
    task_tags: frozenset
    body: str  # body-language source text
    state: str = "draft"
    merged_into: str | None = None
    test_case_ids: list = field(default_factory=list)
    version: int = 1

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.state not in STATES:
            raise ValueError(f"unknown state {self.state!r}")
        if not isinstance(self.task_tags, frozenset):
            object.__setattr__(self, "task_tags", frozenset(self.task_tags))
        bad = self.task_tags - set(TASK_TYPES)
        if bad:
            raise ValueError(f"unknown task tags {sorted(bad)}")

    def signature(self) -> str:
        args = ", ".join(p["name"] for p in self.params)
        return f"{self.name}({args})"

    def retrieval_text(self) -> str:
        """What the similarity embedder sees for this record."""
        return f"{self.signature()}\n{self.description}\n{self.body}"

    def prompt_text(self) -> str:
        """Compact rendering for planner and design prompts."""
        params = "; ".join(
            f"{p['name']} ({p['semantic_type']}): {p['description']}" for p in self.params
        )
        return f"{self.signature()}: {self.description}\n  params: {params or 'none'}"

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "params": self.params,
            "description": self.description,
            "category": self.category,
            "task_tags": sorted(self.task_tags),
            "body": self.body,
            "state": self.state,
            "merged_into": self.merged_into,
            "test_case_ids": list(self.test_case_ids),
            "version": self.version,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "InterfaceRecord":
        return cls(
            id=obj["id"],
            name=obj["name"],
            params=list(obj["params"]),
            description=obj["description"],
            category=obj["category"],
            task_tags=frozenset(obj["task_tags"]),
            body=obj["body"],
            state=obj["state"],
            merged_into=obj.get("merged_into"),
            test_case_ids=list(obj.get("test_case_ids", [])),
            version=int(obj.get("version", 1)),
        )


@dataclass
class TestCase:
    __test__ = False  # not a pytest class, despite the name

    id: str
    request_text: str
    input_bindings: dict
    expected: DataTable | object  # chart cases carry a ChartSpec-like dict
    status: str = "pending"
    provenance: dict = field(default_factory=dict)  # source id + sample seed

    def to_json_obj(self) -> dict:
        expected = (
            {"kind": "table", "value": self.expected.to_json_obj()}
            if isinstance(self.expected, DataTable)
            else {"kind": "json", "value": self.expected}
        )
        return {
            "id": self.id,
            "request_text": self.request_text,
            "input_bindings": self.input_bindings,
            "expected": expected,
            "status": self.status,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "TestCase":
        wrapped = obj["expected"]
        expected = (
            DataTable.from_json_obj(wrapped["value"])
            if wrapped["kind"] == "table"
            else wrapped["value"]
        )
        return cls(
            id=obj["id"],
            request_text=obj["request_text"],
            input_bindings=obj["input_bindings"],
            expected=expected,
            status=obj.get("status", "pending"),
            provenance=obj.get("provenance", {}),
        )


@dataclass
class UncoveredEntry:
    request_text: str
    timestamp: str
    failure_reason: str
    resolution: str = "open"  # or "resolved"
    interface_id: str | None = None

    def to_json_obj(self) -> dict:
        return {
            "request_text": self.request_text,
            "timestamp": self.timestamp,
            "failure_reason": self.failure_reason,
            "resolution": self.resolution,
            "interface_id": self.interface_id,
        }


class Registry:
    """Single-writer library store backed by an append-only journal."""

    def __init__(self, base_dir: str | Path, uncovered_trigger: int = 20):
        self.base_dir = Path(base_dir)
        self.library_dir = self.base_dir / "library"
        self.journal_path = self.library_dir / "journal.jsonl"
        self.uncovered_trigger = uncovered_trigger
        self._records: dict[str, InterfaceRecord] = {}
        self._cases: dict[str, TestCase] = {}
        self._uncovered: list[UncoveredEntry] = []
        self._imported_created_at = ""
        if self.journal_path.exists():
            self._replay()

    # -- journal ------------------------------------------------------------

    def _append(self, event: dict) -> None:
        self.library_dir.mkdir(parents=True, exist_ok=True)
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")

    def _replay(self) -> None:
        for line in self.journal_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                self._apply(json.loads(line), record_only=True)

    def _apply(self, event: dict, record_only: bool = False) -> None:
        kind = event["event"]
        if kind == "insert":
            record = InterfaceRecord.from_json_obj(event["record"])
            self._records[record.id] = record
        elif kind == "add_cases":
            for obj in event["cases"]:
                case = TestCase.from_json_obj(obj)
                self._cases[case.id] = case
        elif kind == "retire":
            rec = self._records[event["id"]]
            self._records[rec.id] = replace(rec, state="retired")
        elif kind == "merge":
            merged = InterfaceRecord.from_json_obj(event["record"])
            self._records[merged.id] = merged
            for old_id in event["originals"]:
                old = self._records[old_id]
                self._records[old_id] = replace(old, state="merged", merged_into=merged.id)
        elif kind == "log_uncovered":
            self._uncovered.append(UncoveredEntry(
                request_text=event["request"],
                timestamp=event["timestamp"],
                failure_reason=event["reason"],
            ))
        elif kind == "resolve":
            for entry in self._uncovered:
                if entry.request_text == event["request"] and entry.resolution == "open":
                    entry.resolution = "resolved"
                    entry.interface_id = event["interface_id"]
        else:
            raise ValueError(f"unknown journal event {kind!r}")
        if not record_only:
            self._append(event)

    # -- library mutation ---------------------------------------------------

    def insert(self, record: InterfaceRecord, cases: list | None = None) -> None:
        if record.state != "tested":
            raise NotTested(f"{record.name} is {record.state}, only tested records insert")
        clash = self.by_name(record.name)
        if clash is not None and clash.id != record.id:
            raise DuplicateName(f"name {record.name!r} already held by {clash.id}")
        if cases:
            self._apply({"event": "add_cases", "cases": [c.to_json_obj() for c in cases]})
        self._apply({"event": "insert", "record": record.to_json_obj()})

    def add_cases(self, cases: list) -> None:
        self._apply({"event": "add_cases", "cases": [c.to_json_obj() for c in cases]})

    def retire(self, interface_id: str) -> None:
        self.get(interface_id)
        self._apply({"event": "retire", "id": interface_id})

    def record_merge(self, merged: InterfaceRecord, original_ids: list,
                     cases: list | None = None) -> None:
        if merged.state != "tested":
            raise NotTested(f"merged record {merged.name} must be tested")
        for old_id in original_ids:
            self.get(old_id)
        if cases:
            self._apply({"event": "add_cases", "cases": [c.to_json_obj() for c in cases]})
        self._apply({
            "event": "merge",
            "record": merged.to_json_obj(),
            "originals": list(original_ids),
        })

    # -- reads --------------------------------------------------------------

    def get(self, interface_id: str) -> InterfaceRecord:
        """By id, regardless of state: old plans may call retired records."""
        try:
            return self._records[interface_id]
        except KeyError:
            raise NotFound(f"no interface with id {interface_id!r}") from None

    def by_name(self, name: str) -> InterfaceRecord | None:
        for rec in self._records.values():
            if rec.name == name and rec.state not in ("retired", "merged"):
                return rec
        return None

    def active_records(self) -> list[InterfaceRecord]:
        out = [r for r in self._records.values() if r.state == "tested"]
        return sorted(out, key=lambda r: r.id)

    def case(self, case_id: str) -> TestCase:
        try:
            return self._cases[case_id]
        except KeyError:
            raise NotFound(f"no test case with id {case_id!r}") from None

    def cases_for(self, record: InterfaceRecord) -> list[TestCase]:
        return [self.case(cid) for cid in record.test_case_ids]

    def hierarchical_lookup(self, task_types, operation_types=()) -> list[InterfaceRecord]:
        """Non-retired records tagged with any of task_types.

        Empty operation_types widens to every category.
        """
        tasks = set(task_types)
        ops = set(operation_types) or set(CATEGORIES)
        return [
            r for r in self.active_records()
            if (r.task_tags & tasks) and r.category in ops
        ]

    # -- uncovered log -------------------------------------------------------

    def log_uncovered(self, request: str, reason: str, timestamp: str = "") -> None:
        self._apply({
            "event": "log_uncovered",
            "request": request,
            "reason": reason,
            "timestamp": timestamp,
        })

    def resolve_uncovered(self, request: str, interface_id: str) -> None:
        rec = self.get(interface_id)
        if rec.state != "tested":
            raise NotTested(f"resolving interface {interface_id} is {rec.state}")
        self._apply({"event": "resolve", "request": request, "interface_id": interface_id})

    def uncovered_entries(self, resolution: str | None = None) -> list[UncoveredEntry]:
        if resolution is None:
            return list(self._uncovered)
        return [e for e in self._uncovered if e.resolution == resolution]

    def re_exploration_due(self) -> bool:
        return len(self.uncovered_entries("open")) >= self.uncovered_trigger

    # -- snapshots ----------------------------------------------------------

    def snapshot_obj(self, version: int, created_at: str = "") -> dict:
        return {
            "version": version,
            "created_at": created_at or self._imported_created_at,
            "interfaces": [
                self._records[k].to_json_obj() for k in sorted(self._records)
            ],
            "test_cases": [self._cases[k].to_json_obj() for k in sorted(self._cases)],
        }

    def category_counts(self) -> dict:
        counts = {c: 0 for c in CATEGORIES}
        for rec in self.active_records():
            counts[rec.category] += 1
        return counts

    def next_snapshot_version(self) -> int:
        versions = [
            int(p.stem.split("-v")[1])
            for p in self.library_dir.glob("snapshot-v*.json")
        ]
        return max(versions, default=0) + 1

    def export_snapshot(self, created_at: str = "") -> Path:
        version = self.next_snapshot_version()
        path = self.library_dir / f"snapshot-v{version}.json"
        self.library_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(self.snapshot_obj(version, created_at), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        return path

    def import_snapshot(self, path: str | Path) -> None:
        """Replace in-memory state with the snapshot contents.

        The journal file is untouched; importing is how read-only consumers
        (service startup, tests) load a committed library.
        """
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        self._records = {
            rec["id"]: InterfaceRecord.from_json_obj(rec) for rec in obj["interfaces"]
        }
        self._cases = {
            case["id"]: TestCase.from_json_obj(case) for case in obj["test_cases"]
        }
        self._imported_created_at = obj.get("created_at", "")
