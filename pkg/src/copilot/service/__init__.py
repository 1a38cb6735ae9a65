"""Service layer: engine wiring, run persistence, HTTP API, CLI."""

from .engine import Engine, RunOptions, run_explore_sync, run_eval
from .runs import EVENT_KINDS, RUN_STATUSES, ProgressEvent, RunRecord, RunStore

__all__ = [
    "Engine",
    "RunOptions",
    "run_explore_sync",
    "run_eval",
    "RunRecord",
    "RunStore",
    "ProgressEvent",
    "RUN_STATUSES",
    "EVENT_KINDS",
]
