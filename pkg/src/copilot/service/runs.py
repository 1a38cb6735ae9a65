"""Run records and progress events, persisted as one directory per run.

runs/<id>/run.json is the record, runs/<id>/events.jsonl the ordered
event log; chart/table/text artifacts live beside them. Everything is
plain JSON so a run can be inspected or diffed without the service.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import NotFound

RUN_STATUSES = ("queued", "planning", "executing", "done", "failed")
EVENT_KINDS = (
    "intent_ready",
    "plan_ready",
    "node_started",
    "node_done",
    "node_failed",
    "bundle_ready",
)


@dataclass
class ProgressEvent:
    run_id: str
    sequence: int
    kind: str
    payload: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "run_id": self.run_id,
            "sequence": self.sequence,
            "kind": self.kind,
            "payload": self.payload,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ProgressEvent":
        return cls(
            run_id=obj["run_id"],
            sequence=obj["sequence"],
            kind=obj["kind"],
            payload=obj.get("payload", {}),
        )


@dataclass
class RunRecord:
    id: str
    request_text: str
    mode: str = "interface_workflow"
    status: str = "queued"
    intent: dict | None = None
    task_selection: dict | None = None
    plan_text: str = ""
    bundle_dir: str = ""  # relative to the workspace; set when artifacts exist
    library_version: int = 0
    token_usage: dict = field(default_factory=dict)  # per tier
    timings: dict = field(default_factory=dict)
    error: str = ""
    retryable: bool = False

    def advance(self, status: str) -> None:
        """Statuses only move forward; a terminal record never changes."""
        order = {name: i for i, name in enumerate(RUN_STATUSES)}
        if status not in order:
            raise ValueError(f"unknown run status {status!r}")
        if self.status in ("done", "failed"):
            raise ValueError(f"run {self.id} is already {self.status}")
        if order[status] < order[self.status]:
            raise ValueError(f"run {self.id} cannot move {self.status} -> {status}")
        self.status = status

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "request_text": self.request_text,
            "mode": self.mode,
            "status": self.status,
            "intent": self.intent,
            "task_selection": self.task_selection,
            "plan_text": self.plan_text,
            "bundle_dir": self.bundle_dir,
            "library_version": self.library_version,
            "token_usage": self.token_usage,
            "timings": self.timings,
            "error": self.error,
            "retryable": self.retryable,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RunRecord":
        return cls(
            id=obj["id"],
            request_text=obj["request_text"],
            mode=obj.get("mode", "interface_workflow"),
            status=obj.get("status", "queued"),
            intent=obj.get("intent"),
            task_selection=obj.get("task_selection"),
            plan_text=obj.get("plan_text", ""),
            bundle_dir=obj.get("bundle_dir", ""),
            library_version=obj.get("library_version", 0),
            token_usage=obj.get("token_usage", {}),
            timings=obj.get("timings", {}),
            error=obj.get("error", ""),
            retryable=obj.get("retryable", False),
        )


class RunStore:
    def __init__(self, workspace: str | Path):
        self.base = Path(workspace) / "runs"
        self._lock = threading.Lock()

    def run_dir(self, run_id: str) -> Path:
        return self.base / run_id

    def _record_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "run.json"

    def _events_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "events.jsonl"

    def new_run(self, request_text: str, mode: str,
                library_version: int = 0) -> RunRecord:
        with self._lock:
            taken = [
                int(p.name.split("-")[1])
                for p in self.base.glob("run-*")
                if p.name.split("-")[1].isdigit()
            ]
            run_id = f"run-{max(taken, default=0) + 1:04d}"
            record = RunRecord(
                id=run_id,
                request_text=request_text,
                mode=mode,
                library_version=library_version,
                timings={"queued_at": time.time()},
            )
            self.run_dir(run_id).mkdir(parents=True, exist_ok=True)
            self.save(record)
        return record

    def save(self, record: RunRecord) -> None:
        path = self._record_path(record.id)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(record.to_json_obj(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        tmp.replace(path)  # atomic on one filesystem: no half-written records

    def get(self, run_id: str) -> RunRecord:
        path = self._record_path(run_id)
        if not path.exists():
            raise NotFound(f"no run {run_id}")
        return RunRecord.from_json_obj(json.loads(path.read_text(encoding="utf-8")))

    def list_runs(self) -> list[RunRecord]:
        if not self.base.exists():
            return []
        return [self.get(p.name) for p in sorted(self.base.glob("run-*"))]

    def append_event(self, run_id: str, kind: str, payload: dict | None = None) -> ProgressEvent:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        with self._lock:
            path = self._events_path(run_id)
            sequence = 1
            if path.exists():
                with open(path, encoding="utf-8") as fh:
                    sequence += sum(1 for line in fh if line.strip())
            event = ProgressEvent(run_id, sequence, kind, payload or {})
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_json_obj(), ensure_ascii=False) + "\n")
        return event

    def events(self, run_id: str, after: int = 0) -> list[ProgressEvent]:
        if not self._record_path(run_id).exists():
            raise NotFound(f"no run {run_id}")
        path = self._events_path(run_id)
        if not path.exists():
            return []
        out = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            event = ProgressEvent.from_json_obj(json.loads(line))
            if event.sequence > after:
                out.append(event)
        return out

    def recover(self) -> list[str]:
        """Mark runs that never reached a terminal status as failed.

        Called at boot: a run interrupted by a crash keeps its partial
        trace and becomes retryable instead of silently disappearing.
        """
        touched = []
        for record in self.list_runs():
            if record.status in ("done", "failed"):
                continue
            record.status = "failed"
            record.error = record.error or "interrupted by service restart"
            record.retryable = True
            self.save(record)
            touched.append(record.id)
        return touched
