"""Engine wiring plus the request, exploration and benchmark flows.

One Engine owns the catalog, registry, gateway, planner and forge for a
workspace. Runs execute through `run_pipeline`; exploration jobs are
mutually exclusive with each other but not with request serving.

The hybrid policy lives here: a plan that names `__raw_code__` arms the
node-level fallback immediately, and a request whose plan keeps failing
(`executor.hybrid_failure_trigger` consecutive failed runs) is answered
by request-level code generation instead of a third doomed replay.
"""

from __future__ import annotations

import json
import shutil
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..catalog import FetchQuery
from ..charts import ChartSpec
from ..config import EngineConfig
from ..errors import (
    Conflict,
    CopilotError,
    NotFound,
    ProviderUnavailable,
    TapeMiss,
    ValidationFailure,
)
from ..evaluator import (
    NormalizationConfig,
    load_cases,
    run_benchmark,
    table_from_csv_text,
    write_report,
)
from ..executor import (
    ExecutionEnv,
    ResultBundle,
    compile_plan,
    execute,
    hybrid_fallback,
    render,
)
from ..exploration import Request, read_requests
from ..forge import Forge, plan_coverable, run_exploration
from ..llm.gateway import Gateway
from ..planner import RAW_CODE, LoopStep, Planner, serialize_plan, validate_plan
from ..registry import Registry
from ..sources import STOCK_TICKERS, default_catalog
from ..tables import DataTable
from .runs import RunRecord, RunStore

MODES = ("interface_workflow", "direct_code")


@dataclass
class RunOptions:
    mode: str = "interface_workflow"
    hybrid: bool | None = None  # None: follow config.executor.hybrid_enabled

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationFailure(f"unknown mode {self.mode!r}")


@dataclass
class ExploreJob:
    id: str
    status: str = "running"  # running | done | failed
    merge: bool = True
    seed_only: bool = False
    result: dict | None = None
    error: str = ""
    started_at: float = field(default_factory=time.time)
    finished_at: float | None = None

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "status": self.status,
            "merge": self.merge,
            "seed_only": self.seed_only,
            "result": self.result,
            "error": self.error,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }


class Engine:
    """Shared state behind the API and CLI for one workspace."""

    def __init__(self, config: EngineConfig, data_dir: str | Path = ".",
                 gateway: Gateway | None = None, queue_limit: int = 8):
        self.config = config
        self.data_dir = Path(data_dir).resolve()
        self.workspace = Path(config.workspace)
        if not self.workspace.is_absolute():
            self.workspace = self.data_dir / self.workspace
        self.workspace.mkdir(parents=True, exist_ok=True)

        self.catalog = default_catalog(self.data_dir)
        self.registry = Registry(
            self.workspace, uncovered_trigger=config.registry.uncovered_trigger
        )
        self.gateway = gateway or Gateway(config)
        self.planner = Planner(self.gateway, self.registry, config)
        self.forge = Forge(self.gateway, self.registry, self.catalog, config)
        self.store = RunStore(self.workspace)
        self.recovered_runs = self.store.recover()
        self._bootstrap_library()

        self.queue_limit = queue_limit
        self._active: set = set()
        self._failures: dict[str, int] = {}  # request text -> consecutive failed runs
        self._state_lock = threading.Lock()
        self._explore_lock = threading.Lock()
        self._explore_jobs: dict[str, ExploreJob] = {}

    # -- library ------------------------------------------------------------

    def _bootstrap_library(self) -> None:
        """Seed an empty registry from the newest snapshot in the workspace.

        A workspace without snapshots stays empty on purpose: exploration
        must be able to grow a library from nothing. Installing a bundled
        snapshot is an explicit act (`copilot library import`).
        """
        if self.registry._records:  # journal already replayed into state
            return
        local = _local_snapshots(self.registry)
        if local:
            seed_journal_from_snapshot(self.registry, local[-1])

    def library_version(self) -> int:
        return self.registry.next_snapshot_version() - 1

    # -- run bookkeeping ----------------------------------------------------

    def active_runs(self) -> int:
        with self._state_lock:
            return len(self._active)

    def _enter_run(self, run_id: str) -> None:
        with self._state_lock:
            if len(self._active) >= self.queue_limit:
                raise Conflict(
                    f"run queue is full ({self.queue_limit} active); retry later"
                )
            self._active.add(run_id)

    def _leave_run(self, run_id: str) -> None:
        with self._state_lock:
            self._active.discard(run_id)

    def failure_count(self, text: str) -> int:
        with self._state_lock:
            return self._failures.get(text, 0)

    def _note_outcome(self, text: str, failed: bool) -> None:
        with self._state_lock:
            if failed:
                self._failures[text] = self._failures.get(text, 0) + 1
            else:
                self._failures.pop(text, None)

    def usage_by_tier(self, mark: int) -> dict:
        with self.gateway._log_lock:
            window = self.gateway.log[mark:]
        usage: dict = {}
        for entry in window:
            tier = usage.setdefault(
                entry.tier, {"prompt_tokens": 0, "completion_tokens": 0, "calls": 0}
            )
            tier["prompt_tokens"] += entry.prompt_tokens
            tier["completion_tokens"] += entry.completion_tokens
            tier["calls"] += 1
        return usage


# -- request pipeline --------------------------------------------------------


def submit_request(engine: Engine, text: str, options: RunOptions) -> RunRecord:
    """Create the run and execute it on a worker thread."""
    if not text or not text.strip():
        raise ValidationFailure("request text must be non-empty")
    record = engine.store.new_run(text.strip(), options.mode,
                                  library_version=engine.library_version())
    engine._enter_run(record.id)
    worker = threading.Thread(
        target=_run_guarded, args=(engine, record, options), daemon=True
    )
    worker.start()
    return record


def run_request_sync(engine: Engine, text: str, options: RunOptions) -> RunRecord:
    if not text or not text.strip():
        raise ValidationFailure("request text must be non-empty")
    record = engine.store.new_run(text.strip(), options.mode,
                                  library_version=engine.library_version())
    engine._enter_run(record.id)
    _run_guarded(engine, record, options)
    return engine.store.get(record.id)


def _run_guarded(engine: Engine, record: RunRecord, options: RunOptions) -> None:
    try:
        run_pipeline(engine, record, options)
    except (TapeMiss, ProviderUnavailable) as exc:
        _fail(engine, record, f"provider unavailable: {exc}", retryable=True)
    except CopilotError as exc:
        _fail(engine, record, str(exc), retryable=False)
    except Exception as exc:  # total: a bug must not leave a zombie run
        _fail(engine, record, f"{type(exc).__name__}: {exc}", retryable=False)
    finally:
        engine._leave_run(record.id)


def _fail(engine: Engine, record: RunRecord, error: str, retryable: bool) -> None:
    if record.status not in ("done", "failed"):
        record.status = "failed"
    record.error = record.error or error
    record.retryable = retryable
    record.timings["finished_at"] = time.time()
    engine.store.save(record)


def run_pipeline(engine: Engine, record: RunRecord, options: RunOptions) -> None:
    store = engine.store
    text = record.request_text
    mark = engine.gateway.log_mark()
    record.advance("planning")
    record.timings["started_at"] = time.time()
    store.save(record)

    hybrid_on = (
        engine.config.executor.hybrid_enabled
        if options.hybrid is None else options.hybrid
    )

    if options.mode == "direct_code":
        _run_direct(engine, record, mark)
        return

    intent = engine.planner.analyze_intent(text)
    record.intent = intent.to_json_obj()
    store.save(record)
    store.append_event(record.id, "intent_ready", record.intent)

    selection = engine.planner.select_tasks(intent)
    interfaces = engine.planner.retrieve(selection)
    plan = engine.planner.plan_workflow(intent, selection, interfaces)
    report = validate_plan(plan, interfaces, hybrid_enabled=hybrid_on)
    record.task_selection = selection.to_json_obj()
    record.plan_text = serialize_plan(plan)
    if report.errors:
        issues = "; ".join(f"step{i.step} {i.code}: {i.message}" for i in report.errors)
        store.save(record)
        raise ValidationFailure(f"plan rejected: {issues}")
    store.save(record)
    store.append_event(record.id, "plan_ready", {
        "plan": json.loads(record.plan_text),
        "warnings": [vars(i) for i in report.warnings],
    })

    record.advance("executing")
    store.save(record)

    wants_raw = any(name == RAW_CODE for name in _plan_functions(plan))
    failed_before = engine.failure_count(text)
    trigger = engine.config.executor.hybrid_failure_trigger

    if hybrid_on and not wants_raw and failed_before >= trigger:
        # the same plan already failed `trigger` runs in a row; answer with
        # generated code instead of replaying it
        bundle = _request_level_fallback(engine, record, failed_before)
    else:
        handler = _node_fallback_handler(engine, record) if (hybrid_on and wants_raw) else None
        env = ExecutionEnv(
            catalog=engine.catalog,
            registry=engine.registry,
            gateway=engine.gateway,
            config=engine.config,
            hybrid_handler=handler,
        )
        dag = compile_plan(plan)
        bundle = execute(dag, parallelism=engine.config.executor.parallelism, env=env)
        _emit_node_events(store, record.id, dag, bundle)

    failed_nodes = [nid for nid, t in bundle.trace.items() if t.status == "failed"]
    _persist_bundle(engine, record, bundle, intent)
    record.token_usage = engine.usage_by_tier(mark)
    record.timings["finished_at"] = time.time()
    record.timings["duration"] = record.timings["finished_at"] - record.timings["started_at"]

    engine._note_outcome(text, bool(failed_nodes))
    if failed_nodes:
        diags = "; ".join(
            f"{nid}: {bundle.trace[nid].diagnostics}" for nid in failed_nodes
        )
        record.error = f"workflow failed: {diags}"
        record.status = "failed"
        store.save(record)
        return
    record.advance("done")
    store.save(record)


def _plan_functions(plan) -> list:
    names = []
    for step in plan.steps:
        calls = step.body if isinstance(step, LoopStep) else step.calls
        names.extend(call.function_name for call in calls)
    return names


def _node_fallback_handler(engine: Engine, record: RunRecord):
    """Per-node hybrid: fires when the executor meets an unresolvable name."""
    def handle(node, inputs):
        named = {}
        for i, value in enumerate(inputs):
            if isinstance(value, DataTable):
                named["data" if not named else f"data{i + 1}"] = value
        env = ExecutionEnv(
            catalog=engine.catalog,
            registry=engine.registry,
            gateway=engine.gateway,
            config=engine.config,
        )
        workdir = engine.store.run_dir(record.id) / "hybrid" / node.id
        outcome = hybrid_fallback(
            record.request_text, node.description, env,
            inputs=named, workdir=workdir,
        )
        (workdir / "script.py").write_text(outcome.code, encoding="utf-8")
        return outcome.value
    return handle


def _request_level_fallback(engine: Engine, record: RunRecord,
                            failed_before: int) -> ResultBundle:
    from ..executor import NodeTrace

    env = ExecutionEnv(
        catalog=engine.catalog,
        registry=engine.registry,
        gateway=engine.gateway,
        config=engine.config,
    )
    workdir = engine.store.run_dir(record.id) / "hybrid" / "request"
    outcome = hybrid_fallback(
        record.request_text,
        f"the interface workflow failed {failed_before} consecutive runs",
        env, inputs={}, workdir=workdir,
    )
    (workdir / "script.py").write_text(outcome.code, encoding="utf-8")
    summary = (f"step 1: generated code after {failed_before} failed workflow runs "
               f"-> hybrid [done]")
    return ResultBundle(
        values={"hybrid": outcome.value},
        summary=summary,
        trace={"hybrid": NodeTrace("done", 0.0, 0.0)},
    )


def _emit_node_events(store: RunStore, run_id: str, dag, bundle: ResultBundle) -> None:
    # emission in start order; skipped nodes never started, so they trail
    position = {n.id: i for i, n in enumerate(dag.nodes)}

    def order(n):
        t = bundle.trace.get(n.id)
        if t is None or t.status == "skipped":
            return (1, 0.0, position[n.id])
        return (0, t.started_at, position[n.id])

    for node in sorted(dag.nodes, key=order):
        t = bundle.trace.get(node.id)
        if t is None:
            continue
        base = {
            "node_id": node.id,
            "output": node.output_name,
            "description": node.description,
            "status": t.status,
        }
        store.append_event(run_id, "node_started", base)
        kind = "node_done" if t.status == "done" else "node_failed"
        store.append_event(run_id, kind, {
            **base, "duration": round(t.duration, 6), "diagnostics": t.diagnostics,
        })


def _run_direct(engine: Engine, record: RunRecord, mark: int) -> None:
    """Answer without the library: fetch the obvious window, generate code."""
    store = engine.store
    text = record.request_text
    intent = engine.planner.analyze_intent(text)
    record.intent = intent.to_json_obj()
    store.save(record)
    store.append_event(record.id, "intent_ready", record.intent)
    record.advance("executing")
    store.save(record)

    inputs = {}
    subject = intent.objects[0] if intent.objects else ""
    if subject in STOCK_TICKERS:
        table = engine.catalog.fetch("stock.daily", FetchQuery(
            time_range=intent.time_range, filters={"ticker": subject},
        ))
        inputs["data"] = table

    env = ExecutionEnv(  # registry=None: direct mode is not a coverage signal
        catalog=engine.catalog,
        registry=None,
        gateway=engine.gateway,
        config=engine.config,
    )
    workdir = store.run_dir(record.id) / "hybrid" / "direct"
    outcome = hybrid_fallback(
        text, "direct code generation without the interface library",
        env, inputs=inputs, workdir=workdir,
    )
    (workdir / "script.py").write_text(outcome.code, encoding="utf-8")

    from ..executor import NodeTrace

    bundle = ResultBundle(
        values={"direct": outcome.value},
        summary=f"step 1: direct generated code ({outcome.attempts} attempt"
                f"{'s' if outcome.attempts != 1 else ''}) -> direct [done]",
        trace={"direct": NodeTrace("done", 0.0, 0.0)},
    )
    _persist_bundle(engine, record, bundle, intent)
    record.token_usage = engine.usage_by_tier(mark)
    record.timings["finished_at"] = time.time()
    record.timings["duration"] = record.timings["finished_at"] - record.timings["started_at"]
    engine._note_outcome(text, False)
    record.advance("done")
    store.save(record)


def _persist_bundle(engine: Engine, record: RunRecord, bundle: ResultBundle,
                    intent) -> None:
    """Write charts/tables/texts/summary under the run directory."""
    run_dir = engine.store.run_dir(record.id)
    out = render(bundle, intent)

    chart_dir = run_dir / "charts"
    table_dir = run_dir / "tables"
    chart_files = []
    for i, spec in enumerate(out.charts, start=1):
        chart_dir.mkdir(parents=True, exist_ok=True)
        path = chart_dir / f"chart-{i:02d}.json"
        path.write_text(
            json.dumps(spec.to_json_obj(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        chart_files.append(path.name)
    for name, table in out.tables.items():
        table_dir.mkdir(parents=True, exist_ok=True)
        (table_dir / f"{name}.csv").write_text(table.to_csv_text(), encoding="utf-8")
    (run_dir / "summary.md").write_text(out.workflow_summary + "\n", encoding="utf-8")

    index = {
        "charts": chart_files,
        "tables": sorted(out.tables),
        "texts": out.texts,
        "summary": out.workflow_summary,
    }
    (run_dir / "bundle.json").write_text(
        json.dumps(index, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    record.bundle_dir = str(run_dir.relative_to(engine.workspace))
    engine.store.append_event(record.id, "bundle_ready", {
        "charts": len(chart_files),
        "tables": sorted(out.tables),
        "texts": sorted(out.texts),
    })


def run_bundle_obj(engine: Engine, record: RunRecord) -> dict | None:
    """Inline bundle view for API consumers: charts as specs, tables as cells."""
    if not record.bundle_dir:
        return None
    run_dir = engine.workspace / record.bundle_dir
    index_path = run_dir / "bundle.json"
    if not index_path.exists():
        return None
    index = json.loads(index_path.read_text(encoding="utf-8"))
    charts = []
    for name in index.get("charts", []):
        charts.append(json.loads((run_dir / "charts" / name).read_text(encoding="utf-8")))
    tables = {}
    for name in index.get("tables", []):
        table = table_from_csv_text(
            (run_dir / "tables" / f"{name}.csv").read_text(encoding="utf-8")
        )
        tables[name] = {
            "columns": table.column_names,
            "rows": [table.row(i) for i in range(table.row_count)],
        }
    return {
        "charts": charts,
        "tables": tables,
        "texts": index.get("texts", {}),
        "summary": index.get("summary", ""),
    }


# -- exploration -------------------------------------------------------------


def run_explore_sync(engine: Engine, merge: bool = True, seed_only: bool = False,
                     corpus_path: str | Path | None = None, on_event=None) -> dict:
    """Exploration over the bundled corpus plus, by default, open uncovered
    requests; afterwards resolves every entry the grown library now covers."""
    corpus = Path(corpus_path) if corpus_path else (
        engine.data_dir / "fixtures" / "corpus" / "requests.jsonl"
    )
    if not corpus.exists():
        raise NotFound(f"no request corpus at {corpus}")
    requests = read_requests(corpus)
    if not seed_only:
        known = {r.text for r in requests}
        for entry in engine.registry.uncovered_entries("open"):
            if entry.request_text not in known:
                requests.append(Request(
                    text=entry.request_text,
                    provenance="synthesized",
                    topic_keyword="uncovered",
                ))
                known.add(entry.request_text)

    before = {r.name for r in engine.registry.active_records()}
    checkpoint = engine.workspace / "explore-checkpoint.json"
    result = run_exploration(
        engine.forge, engine.planner, requests,
        merge=merge, on_event=on_event, checkpoint_path=checkpoint,
    )
    checkpoint.unlink(missing_ok=True)  # a finished job must not mask the next one

    resolved = []
    for entry in engine.registry.uncovered_entries("open"):
        if not plan_coverable(engine.planner, entry.request_text):
            continue
        _, _, _, plan, _ = engine.planner.plan_request(entry.request_text)
        names = [n for n in _plan_functions(plan) if n != RAW_CODE]
        fresh = [n for n in names if n not in before]
        pick = (fresh or names)[0]
        interface_id = engine.registry.by_name(pick).id
        engine.registry.resolve_uncovered(entry.request_text, interface_id)
        resolved.append({"request": entry.request_text, "interface_id": interface_id})
    result["resolved"] = resolved
    closed = {r["request"] for r in resolved}
    result["uncovered"] = [t for t in result["uncovered"] if t not in closed]
    result["covered"] = sorted(set(result["covered"]) | closed)
    return result


def start_explore(engine: Engine, merge: bool = True, seed_only: bool = False) -> ExploreJob:
    if not engine._explore_lock.acquire(blocking=False):
        raise Conflict("an exploration job is already running")
    job_id = f"explore-{len(engine._explore_jobs) + 1:04d}"
    job = ExploreJob(id=job_id, merge=merge, seed_only=seed_only)
    engine._explore_jobs[job_id] = job

    def work():
        try:
            job.result = run_explore_sync(engine, merge=merge, seed_only=seed_only)
            job.status = "done"
        except CopilotError as exc:
            job.status = "failed"
            job.error = str(exc)
        except Exception as exc:
            job.status = "failed"
            job.error = f"{type(exc).__name__}: {exc}"
        finally:
            job.finished_at = time.time()
            engine._explore_lock.release()

    threading.Thread(target=work, daemon=True).start()
    return job


def get_explore_job(engine: Engine, job_id: str) -> ExploreJob:
    job = engine._explore_jobs.get(job_id)
    if job is None:
        raise NotFound(f"no exploration job {job_id}")
    return job


def _local_snapshots(registry: Registry) -> list:
    paths = list(registry.library_dir.glob("snapshot-v*.json"))
    return sorted(paths, key=lambda p: int(p.stem.split("-v")[-1]))


def seed_journal_from_snapshot(registry: Registry, path: str | Path) -> None:
    """Load a snapshot and journal its contents as ordinary events.

    Plain import_snapshot leaves the journal empty, so growth recorded
    after it would survive a restart while the baseline vanished. Routing
    the baseline through the journal keeps replay self-contained.
    """
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("test_cases"):
        registry._apply({"event": "add_cases", "cases": obj["test_cases"]})
    for rec in obj.get("interfaces", []):
        registry._apply({"event": "insert", "record": rec})
    registry._imported_created_at = obj.get("created_at", "")


def install_snapshot(registry: Registry, path: str | Path) -> int:
    """Copy a snapshot file into the library and seed the journal from it.

    Keeping the file preserves version numbering: the next export lands
    at version+1 instead of restarting from 1.
    """
    path = Path(path)
    obj = json.loads(path.read_text(encoding="utf-8"))
    version = int(obj.get("version", 1))
    registry.library_dir.mkdir(parents=True, exist_ok=True)
    dest = registry.library_dir / f"snapshot-v{version}.json"
    if path.resolve() != dest.resolve():
        shutil.copy(path, dest)
    seed_journal_from_snapshot(registry, dest)
    return version


# -- benchmarks --------------------------------------------------------------


def make_runner(engine: Engine):
    """runner(request, mode) for the evaluation harness."""

    def interface_outcome(request: str) -> tuple:
        intent = engine.planner.analyze_intent(request)
        selection = engine.planner.select_tasks(intent)
        interfaces = engine.planner.retrieve(selection)
        plan = engine.planner.plan_workflow(intent, selection, interfaces)
        report = validate_plan(
            plan, interfaces, hybrid_enabled=engine.config.executor.hybrid_enabled
        )
        if report.errors:
            raise ValidationFailure(
                "; ".join(i.message for i in report.errors)
            )
        env = ExecutionEnv(
            catalog=engine.catalog,
            registry=engine.registry,
            gateway=engine.gateway,
            config=engine.config,
        )
        dag = compile_plan(plan)
        bundle = execute(dag, parallelism=1, env=env)
        failed = [nid for nid, t in bundle.trace.items() if t.status == "failed"]
        if failed:
            raise CopilotError(
                f"workflow failed at {failed[0]}: {bundle.trace[failed[0]].diagnostics}"
            )
        table = None
        chart = None
        for name in dag.plan_outputs:  # report the last table, first chart
            value = bundle.values.get(name)
            if isinstance(value, DataTable):
                table = value
            elif isinstance(value, ChartSpec) and chart is None:
                chart = value
        return table, chart, intent

    def direct_outcome(request: str) -> tuple:
        intent = engine.planner.analyze_intent(request)
        subject = intent.objects[0] if intent.objects else ""
        inputs = {}
        if subject in STOCK_TICKERS:
            inputs["data"] = engine.catalog.fetch("stock.daily", FetchQuery(
                time_range=intent.time_range, filters={"ticker": subject},
            ))
        env = ExecutionEnv(
            catalog=engine.catalog,
            registry=None,
            gateway=engine.gateway,
            config=engine.config,
        )
        outcome = hybrid_fallback(
            request, "direct code generation without the interface library",
            env, inputs=inputs,
        )
        chart = outcome.value if isinstance(outcome.value, ChartSpec) else None
        table = outcome.value if isinstance(outcome.value, DataTable) else None
        if table is None and chart is not None and chart.series:
            # the labeled answer is tabular; read it back off the drawn series
            first = chart.series[0]
            lines = ["date,close"]
            lines += [f"{x},{y}" for x, y in zip(first.x, first.y)]
            table = table_from_csv_text("\n".join(lines) + "\n")
        return table, chart, intent

    def run(request: str, mode: str) -> dict:
        mark = engine.gateway.log_mark()
        if mode == "interface_workflow":
            table, chart, intent = interface_outcome(request)
        elif mode == "direct_code":
            table, chart, intent = direct_outcome(request)
        else:
            raise ValidationFailure(f"unknown benchmark mode {mode!r}")
        usage = engine.gateway.usage_since(mark)
        return {
            "table": table,
            "chart": chart,
            "intent": intent.to_json_obj(),
            "output_tokens": usage["completion_tokens"],
        }

    return run


def run_eval(engine: Engine, cases_path: str | Path, mode: str,
             name: str | None = None, parallelism: int = 1):
    """Benchmark `cases_path` in one mode; report lands in workspace/benchmarks."""
    cases_path = Path(cases_path)
    if not cases_path.exists():
        raise NotFound(f"no benchmark cases at {cases_path}")
    cases = load_cases(cases_path)
    report = run_benchmark(
        cases, mode, make_runner(engine),
        cfg=NormalizationConfig(float_rtol=engine.config.evaluator.float_rtol),
        parallelism=parallelism,
        metadata={"cases_file": cases_path.name,
                  "library_version": engine.library_version()},
    )
    bench_id = name or f"{cases_path.stem}-{mode}"
    write_report(report, engine.workspace / "benchmarks", bench_id)
    return bench_id, report
