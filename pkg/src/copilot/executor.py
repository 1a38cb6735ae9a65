"""Plan execution: DAG compilation, bounded-parallel scheduling, hybrid fallback.

Nodes are pure functions of their inputs (catalog reads only), so bundle
values are identical for every parallelism level and completion order. A
node that outlives its wall-clock budget is marked failed and its thread
abandoned; bodies cannot block, so this only trims runaway computations.

Loops expand statically: n items times b body calls, plus one merge node
that concatenates the last body output across items in item order. Only
that last output is visible to later steps.
"""

from __future__ import annotations

import json
import re
import tempfile
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path

from .bodylang import parse_and_check
from .bodylang.diagnostics import Diagnostics
from .bodylang.external import ExternalRunSpec, run_external
from .bodylang.interpreter import run_body
from .charts import ChartSpec
from .config import EngineConfig
from .errors import (
    CopilotError,
    CycleError,
    EmptyResult,
    FallbackExhausted,
    LoopExpansionError,
)
from .llm import ChatMessage
from .planner import RAW_CODE, LoopStep, WorkflowPlan
from .tables import DataTable, format_cell

_RESULT_RE = re.compile(r"^result\d+$")
_INTERNAL = "#"  # joins a loop-body output name with its item index


@dataclass(frozen=True)
class DagNode:
    id: str
    step_index: int
    kind: str  # call | merge
    function_name: str
    args: tuple
    output_name: str  # internal name, unique across the dag
    description: str
    depends_on: tuple
    plan_output: str | None  # plan-level name this node publishes, if any


@dataclass(frozen=True)
class ExecutableDag:
    nodes: tuple  # already in topological order
    plan_outputs: tuple

    def node(self, node_id: str) -> DagNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


@dataclass
class NodeTrace:
    status: str  # done | failed | skipped
    started_at: float = 0.0
    duration: float = 0.0
    diagnostics: str = ""


@dataclass
class ResultBundle:
    values: dict
    summary: str
    trace: dict  # node id -> NodeTrace


@dataclass
class MultiFormOutput:
    charts: list
    tables: dict
    texts: dict
    workflow_summary: str


@dataclass
class RawCodeOutcome:
    code: str
    stdout: str
    value: object
    attempts: int
    diagnostics: list = field(default_factory=list)


@dataclass
class ExecutionEnv:
    catalog: object
    registry: object = None
    gateway: object = None
    config: EngineConfig = field(default_factory=EngineConfig)
    records: dict | None = None  # explicit name -> InterfaceRecord override
    hybrid_handler: object = None  # (node, inputs) -> value

    def resolve(self, name: str):
        if self.records is not None and name in self.records:
            return self.records[name]
        if self.registry is None:
            return None
        active = self.registry.by_name(name)
        if active is not None:
            return active
        # old plans may name retired or merged records; still invocable
        candidates = [
            r for r in getattr(self.registry, "_records", {}).values() if r.name == name
        ]
        return max(candidates, key=lambda r: r.id) if candidates else None


# -- compilation ------------------------------------------------------------


def _refs_in(value, found: list) -> None:
    if isinstance(value, str) and _RESULT_RE.match(value):
        found.append(value)
    elif isinstance(value, (list, tuple)):
        for item in value:
            _refs_in(item, found)


def _substitute(value, mapping: dict):
    if isinstance(value, str) and value in mapping:
        return mapping[value]
    if isinstance(value, (list, tuple)):
        return tuple(_substitute(v, mapping) for v in value)
    return value


def compile_plan(plan: WorkflowPlan, library=None) -> ExecutableDag:
    # step index that produces each plan-level output, for cycle detection
    produced_at: dict[str, int] = {}
    loop_internal: set = set()
    for index, step in enumerate(plan.steps, start=1):
        if isinstance(step, LoopStep):
            for call in step.body[:-1]:
                loop_internal.add(call.output_name)
            produced_at[step.body[-1].output_name] = index
        else:
            for call in step.calls:
                produced_at[call.output_name] = index

    nodes: list[DagNode] = []
    producer: dict[str, str] = {}  # plan-level output -> node id

    def check_refs(args, step_index: int, allow: dict) -> list:
        deps = []
        refs: list = []
        _refs_in(args, refs)
        for ref in refs:
            if ref in allow:
                deps.append(allow[ref])
                continue
            if ref in loop_internal:
                raise LoopExpansionError(
                    f"step{step_index} references {ref}, which is internal to a loop body; "
                    "only the last body output is visible outside the loop"
                )
            owner = produced_at.get(ref)
            if owner is None:
                raise CycleError(f"step{step_index} references {ref}, which no step produces")
            if owner >= step_index:
                raise CycleError(
                    f"step{step_index} references {ref} produced in step{owner}"
                )
            deps.append(producer[ref])
        return deps

    for index, step in enumerate(plan.steps, start=1):
        if isinstance(step, LoopStep):
            if not isinstance(step.over, (list, tuple)):
                raise LoopExpansionError(
                    f"step{index} loop over must be a literal list, got {step.over!r}"
                )
            items = list(step.over)
            if not items:
                raise LoopExpansionError(f"step{index} loop over an empty list")
            body_names = {c.output_name for c in step.body}
            last_name = step.body[-1].output_name
            merge_deps = []
            for j, item in enumerate(items, start=1):
                item_outputs: dict[str, str] = {}
                for k, call in enumerate(step.body, start=1):
                    node_id = f"n{index}_it{j}_{k}"
                    refs: list = []
                    _refs_in(call.args, refs)
                    deps = []
                    for ref in dict.fromkeys(refs):
                        if ref in item_outputs:  # earlier body call, this item
                            deps.append(item_outputs[ref])
                        elif ref in body_names:
                            raise CycleError(
                                f"step{index} loop body references {ref} "
                                "before it is produced"
                            )
                        else:
                            deps += check_refs([ref], index, {})
                    mapping = {step.var: item}
                    mapping.update({
                        name: f"{name}{_INTERNAL}{j}" for name in item_outputs
                    })
                    args = _substitute(call.args, mapping)
                    nodes.append(DagNode(
                        id=node_id,
                        step_index=index,
                        kind="call",
                        function_name=call.function_name,
                        args=args,
                        output_name=f"{call.output_name}{_INTERNAL}{j}",
                        description=f"{call.description} [{item}]",
                        depends_on=tuple(dict.fromkeys(deps)),
                        plan_output=None,
                    ))
                    item_outputs[call.output_name] = node_id
                merge_deps.append(item_outputs[last_name])
            merge_id = f"n{index}_merge"
            nodes.append(DagNode(
                id=merge_id,
                step_index=index,
                kind="merge",
                function_name="",
                args=tuple(f"{last_name}{_INTERNAL}{j}" for j in range(1, len(items) + 1)),
                output_name=last_name,
                description=f"Concatenate {len(items)} per-item results",
                depends_on=tuple(merge_deps),
                plan_output=last_name,
            ))
            producer[last_name] = merge_id
        else:
            for i, call in enumerate(step.calls, start=1):
                node_id = f"n{index}_{i}"
                deps = check_refs(call.args, index, {})
                nodes.append(DagNode(
                    id=node_id,
                    step_index=index,
                    kind="call",
                    function_name=call.function_name,
                    args=call.args,
                    output_name=call.output_name,
                    description=call.description,
                    depends_on=tuple(dict.fromkeys(deps)),
                    plan_output=call.output_name,
                ))
                producer[call.output_name] = node_id

    return ExecutableDag(nodes=tuple(nodes), plan_outputs=tuple(plan.output_names()))


# -- execution --------------------------------------------------------------


def _resolve_args(args, values: dict):
    def resolve(value):
        if isinstance(value, str) and value in values:
            return values[value]
        if isinstance(value, tuple):
            return [resolve(v) for v in value]
        return value
    return [resolve(a) for a in args]


def _run_node(node: DagNode, env: ExecutionEnv, values: dict, body_cache: dict):
    """Returns the node's value; raises CopilotError with diagnostics text."""
    if node.kind == "merge":
        parts = [values[name] for name in node.args]
        if not all(isinstance(p, DataTable) for p in parts):
            raise CopilotError("loop merge needs tables from every iteration")
        return DataTable.concat(parts)

    record = env.resolve(node.function_name)
    if record is None:
        if env.hybrid_handler is not None:
            inputs = _resolve_args(node.args, values)
            return env.hybrid_handler(node, inputs)
        raise CopilotError(f"no interface named {node.function_name!r}")

    if record.id not in body_cache:
        body_cache[record.id] = parse_and_check(record.body)
    program = body_cache[record.id]
    if isinstance(program, Diagnostics):
        raise CopilotError(f"{node.function_name} body invalid: {program.render()}")

    resolved = _resolve_args(node.args, values)
    params = [p["name"] for p in record.params]
    if len(resolved) != len(params):
        raise CopilotError(
            f"{node.function_name} takes {len(params)} args, got {len(resolved)}"
        )
    outcome = run_body(program, dict(zip(params, resolved)), env.catalog)
    if isinstance(outcome, Diagnostics):
        raise CopilotError(f"{node.function_name} failed: {outcome.render()}")
    return outcome


def execute(dag: ExecutableDag, parallelism: int = 1,
            env: ExecutionEnv | None = None) -> ResultBundle:
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    env = env or ExecutionEnv(catalog=None)
    timeout = env.config.executor.node_timeout

    values: dict = {}  # internal output name -> value
    trace: dict[str, NodeTrace] = {}
    body_cache: dict = {}
    started = time.monotonic()

    by_id = {n.id: n for n in dag.nodes}
    blocked: dict[str, set] = {n.id: set(n.depends_on) for n in dag.nodes}
    dependants: dict[str, list] = {n.id: [] for n in dag.nodes}
    for n in dag.nodes:
        for dep in n.depends_on:
            dependants[dep].append(n.id)
    ready = [n.id for n in dag.nodes if not blocked[n.id]]
    pending: dict = {}  # future -> (node id, deadline)

    def skip_descendants(node_id: str) -> None:
        stack = list(dependants[node_id])
        while stack:
            child = stack.pop()
            if child in trace:
                continue
            trace[child] = NodeTrace(status="skipped",
                                     diagnostics=f"ancestor {node_id} failed")
            stack.extend(dependants[child])

    def finish(node_id: str, value, error: str | None, begun: float) -> None:
        node = by_id[node_id]
        elapsed = time.monotonic() - begun
        if error is None:
            values[node.output_name] = value
            trace[node_id] = NodeTrace("done", begun - started, elapsed)
            for child in dependants[node_id]:
                blocked[child].discard(node_id)
                if not blocked[child] and child not in trace:
                    ready.append(child)
        else:
            trace[node_id] = NodeTrace("failed", begun - started, elapsed, error)
            skip_descendants(node_id)

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        while ready or pending:
            while ready and len(pending) < parallelism:
                node_id = ready.pop(0)
                if node_id in trace:  # skipped while queued
                    continue
                begun = time.monotonic()
                future = pool.submit(_run_node, by_id[node_id], env, values, body_cache)
                pending[future] = (node_id, begun, begun + timeout)
            if not pending:
                continue
            done, _ = wait(pending, timeout=0.05, return_when=FIRST_COMPLETED)
            now = time.monotonic()
            for future in done:
                node_id, begun, _deadline = pending.pop(future)
                try:
                    finish(node_id, future.result(), None, begun)
                except CopilotError as exc:
                    finish(node_id, None, str(exc), begun)
                except Exception as exc:  # keep the scheduler total
                    finish(node_id, None, f"{type(exc).__name__}: {exc}", begun)
            for future in list(pending):
                node_id, begun, deadline = pending[future]
                if now > deadline:
                    pending.pop(future)
                    future.cancel()  # abandoned if already running
                    finish(node_id, None,
                           f"NodeTimeout: exceeded {timeout:.1f}s wall clock", begun)

    bundle_values = {
        name: values[name] for name in dag.plan_outputs if name in values
    }
    return ResultBundle(
        values=bundle_values,
        summary=_summary(dag, trace),
        trace=trace,
    )


def _summary(dag: ExecutableDag, trace: dict) -> str:
    lines = []
    for node in dag.nodes:
        t = trace.get(node.id)
        if t is None:
            continue
        marker = {"done": "done", "failed": "FAILED", "skipped": "skipped"}[t.status]
        suffix = f" ({t.diagnostics})" if t.status != "done" and t.diagnostics else ""
        lines.append(f"step {node.step_index}: {node.description} -> "
                     f"{node.output_name} [{marker}]{suffix}")
    return "\n".join(lines)


# -- hybrid fallback --------------------------------------------------------


_FENCE_RE = re.compile(r"```(?:python)?\n(.*?)```", re.DOTALL)


def _extract_code(reply: str) -> str:
    match = _FENCE_RE.search(reply)
    return (match.group(1) if match else reply).strip() + "\n"


def _parse_emitted(stdout: str):
    """Generated code must print one JSON document on its last stdout line."""
    lines = [ln for ln in stdout.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("code printed nothing")
    doc = json.loads(lines[-1])
    if not isinstance(doc, dict):
        raise ValueError("emitted JSON must be an object")
    if "chart" in doc:
        return ChartSpec.from_json_obj(doc["chart"])
    if "table" in doc:
        return DataTable.from_json_obj(doc["table"])
    if "text" in doc:
        return str(doc["text"])
    raise ValueError("emitted JSON needs a chart, table or text key")


def hybrid_fallback(request: str, failure_context: str, env: ExecutionEnv,
                    inputs: dict | None = None, workdir=None,
                    attempts: int | None = None) -> RawCodeOutcome:
    """Ask the deployer tier for raw code and run it in the sandbox.

    The request is logged uncovered before the first attempt: fallback
    success still signals a library gap for the next exploration round.
    """
    if env.registry is not None:
        env.registry.log_uncovered(
            request, failure_context or "no covering interface",
            timestamp=env.config.clock,
        )
    if not env.config.executor.hybrid_enabled:
        raise FallbackExhausted("hybrid fallback is disabled", attempts=[])
    rounds = attempts or env.config.forge.repair_rounds

    jail = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="hybrid-"))
    jail.mkdir(parents=True, exist_ok=True)
    listing = []
    for name, value in (inputs or {}).items():
        if isinstance(value, DataTable):
            (jail / f"{name}.csv").write_text(value.to_csv_text(), encoding="utf-8")
            listing.append(f"{name}.csv ({value.row_count} rows, "
                           f"columns: {', '.join(value.column_names)})")

    base = (
        f"Goal: {request}\n"
        f"Context: {failure_context or 'no interface covers this goal'}\n"
        f"Input files in the working directory: {'; '.join(listing) or 'none'}\n"
        "Write a self-contained Python 3 script using only the standard library. "
        "It must print exactly one JSON object to stdout as its last line: "
        '{"chart": {"type", "title", "x_label", "y_label", "series": '
        '[{"name", "x", "y", "color"}]}} for a figure, or {"table": ...} or '
        '{"text": ...}. No network access.'
    )
    messages = [
        ChatMessage("system", "You write small, dependency-free Python scripts. "
                              "Reply with a single fenced code block."),
        ChatMessage("user", base),
    ]
    diagnostics: list = []
    for round_no in range(1, rounds + 1):
        reply = env.gateway.complete("deployer", messages).text
        code = _extract_code(reply)
        try:
            result = run_external(ExternalRunSpec(code=code, workdir=str(jail)))
            if result.exit_code != 0:
                raise ValueError(f"exit {result.exit_code}: {result.stderr.strip()[:400]}")
            value = _parse_emitted(result.stdout)
            return RawCodeOutcome(
                code=code,
                stdout=result.stdout,
                value=value,
                attempts=round_no,
                diagnostics=diagnostics,
            )
        except (ValueError, CopilotError, json.JSONDecodeError) as exc:
            diagnostics.append(f"attempt {round_no}: {exc}")
            messages = messages + [
                ChatMessage("assistant", reply),
                ChatMessage("user", f"That failed: {exc}. Fix the script; same output "
                                    "contract, one JSON object on the last line."),
            ]
    raise FallbackExhausted(
        f"code generation failed after {rounds} attempts", attempts=diagnostics,
    )


# -- rendering --------------------------------------------------------------


def render(bundle: ResultBundle, intent=None) -> MultiFormOutput:
    has_diags = any(t.diagnostics for t in bundle.trace.values())
    if not bundle.values and not has_diags:
        raise EmptyResult("bundle carries no values and no diagnostics")
    charts: list = []
    tables: dict = {}
    texts: dict = {}
    for name, value in bundle.values.items():
        if isinstance(value, ChartSpec):
            charts.append(value)
        elif isinstance(value, DataTable):
            tables[name] = value
        elif isinstance(value, str):
            texts[name] = value
        elif isinstance(value, (int, float, bool)):
            texts[name] = format_cell(value)
        else:
            texts[name] = json.dumps(value, ensure_ascii=False, default=str)
    return MultiFormOutput(
        charts=charts,
        tables=tables,
        texts=texts,
        workflow_summary=bundle.summary,
    )
