"""HTTP face of the engine: JSON endpoints plus SSE progress streams.

Every route is a thin translation layer; behaviour lives in engine.py.
Domain errors map onto status codes in one place (`_error_handlers`),
with one exception: a full run queue answers 429 rather than 409 so
clients can tell "retry later" from "someone else holds the lock".
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..errors import Conflict, NotFound, ValidationFailure
from ..registry import Taxonomy
from .engine import (
    Engine,
    RunOptions,
    get_explore_job,
    run_bundle_obj,
    start_explore,
    submit_request,
)

TERMINAL = ("done", "failed")
POLL_INTERVAL = 0.05


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="copilot-engine", docs_url=None, redoc_url=None)
    app.state.engine = engine

    @app.exception_handler(ValidationFailure)
    async def _invalid(request: Request, exc: ValidationFailure):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(NotFound)
    async def _missing(request: Request, exc: NotFound):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(Conflict)
    async def _conflict(request: Request, exc: Conflict):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.post("/api/requests", status_code=202)
    def post_request(body: dict):
        text = body.get("text", "")
        options = RunOptions(
            mode=body.get("mode", "interface_workflow"),
            hybrid=body.get("hybrid"),
        )
        try:
            record = submit_request(engine, text, options)
        except Conflict as exc:  # queue full, not a state conflict
            return JSONResponse(status_code=429, content={"error": str(exc)})
        return {"run_id": record.id, "status": record.status}

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: str):
        record = engine.store.get(run_id)
        return {**record.to_json_obj(), "bundle": run_bundle_obj(engine, record)}

    @app.get("/api/runs/{run_id}/events")
    def get_events(run_id: str):
        engine.store.get(run_id)  # 404 before the stream starts

        def stream():
            after = 0
            while True:
                for event in engine.store.events(run_id, after=after):
                    after = event.sequence
                    payload = json.dumps(event.to_json_obj(), ensure_ascii=False)
                    yield f"id: {event.sequence}\nevent: {event.kind}\ndata: {payload}\n\n"
                record = engine.store.get(run_id)
                if record.status in TERMINAL:
                    # drain anything written between the read and the check
                    for event in engine.store.events(run_id, after=after):
                        after = event.sequence
                        payload = json.dumps(event.to_json_obj(), ensure_ascii=False)
                        yield (f"id: {event.sequence}\nevent: {event.kind}\n"
                               f"data: {payload}\n\n")
                    yield (f"event: run_closed\ndata: "
                           f"{json.dumps({'status': record.status})}\n\n")
                    return
                time.sleep(POLL_INTERVAL)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/api/runs")
    def list_runs():
        return {"runs": [r.to_json_obj() for r in engine.store.list_runs()]}

    @app.get("/api/interfaces")
    def list_interfaces(task: str = "", category: str = ""):
        taxonomy = Taxonomy()
        tasks = [t for t in task.split(",") if t] or list(taxonomy.task_axis)
        ops = [c for c in category.split(",") if c]
        records = engine.registry.hierarchical_lookup(tasks, ops)
        return {
            "library_version": engine.library_version(),
            "taxonomy": {
                "task_axis": list(taxonomy.task_axis),
                "operation_axis": list(taxonomy.operation_axis),
            },
            "interfaces": [r.to_json_obj() for r in sorted(records, key=lambda r: r.id)],
        }

    @app.post("/api/explore", status_code=202)
    def post_explore(body: dict | None = None):
        body = body or {}
        job = start_explore(
            engine,
            merge=bool(body.get("merge", True)),
            seed_only=bool(body.get("seed_only", False)),
        )
        return {"job_id": job.id, "status": job.status}

    @app.get("/api/explore/{job_id}")
    def explore_status(job_id: str):
        return get_explore_job(engine, job_id).to_json_obj()

    @app.get("/api/library/export")
    def library_export():
        snapshots = sorted(engine.registry.library_dir.glob("snapshot-v*.json"))
        if snapshots:
            text = snapshots[-1].read_text(encoding="utf-8")
        else:
            obj = engine.registry.snapshot_obj(engine.library_version())
            text = json.dumps(obj, ensure_ascii=False, indent=2) + "\n"
        return Response(content=text, media_type="application/json")

    @app.get("/api/benchmarks/{bench_id}")
    def benchmark(bench_id: str):
        path = engine.workspace / "benchmarks" / f"{bench_id}.json"
        if not path.exists():
            raise NotFound(f"no benchmark report {bench_id}")
        return json.loads(path.read_text(encoding="utf-8"))

    console_dist = engine.data_dir / "frontend" / "dist"
    if console_dist.is_dir():
        app.mount("/console", StaticFiles(directory=console_dist, html=True),
                  name="console")

    return app
