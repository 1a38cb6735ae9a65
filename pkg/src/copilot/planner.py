"""Request front half: intent parsing, task selection, retrieval, plan emission.

The three LLM-backed operations (intent, tasks, plan) go through the deployer
tier with fixed prompt shapes so scripted tapes stay stable. Everything the
model returns is re-validated here; invariants hold regardless of provider.

Plan JSON dialect, bit-exact:
    {"step1": {"arg1": [...], "function1": "name", "output1": "result1",
               "description1": "..."}, "step2": ...}
Parallel calls continue with arg2/function2/..., loops nest under a "loop"
key with over/var/body. `__raw_code__` is the reserved function name for
sub-goals no interface covers (hybrid fallback).
"""

from __future__ import annotations

import datetime
import json
import re
from dataclasses import dataclass, field

from .charts import CHART_TYPES
from .errors import NoTaskApplicable, PlanUnserializable, UnparseableRequest
from .llm import ChatMessage
from .tables import normalize_date

OUTPUT_FORMATS = ("line", "bar", "kline", "table", "text", "radar", "auto")
TASK_NAMES = ("stock_task", "fund_task", "economic_task", "visualization_task")
RAW_CODE = "__raw_code__"

# which catalog task tags each planner task searches
TASK_TAGS = {
    "stock_task": ("stock", "corporation"),
    "fund_task": ("fund",),
    "economic_task": ("other",),
}
DATA_CATEGORIES = (
    "data_acquisition", "index_calculation", "table_manipulation", "general_processing",
)

_RESULT_RE = re.compile(r"^result\d+$")


# -- intent -----------------------------------------------------------------


@dataclass(frozen=True)
class ParsedIntent:
    rewritten_text: str
    time_range: tuple[str, str]
    location: str
    objects: tuple
    output_format: str
    defaulted_time: bool = False
    original_text: str = ""

    def __post_init__(self):
        if self.output_format not in OUTPUT_FORMATS:
            raise ValueError(f"unknown output format {self.output_format!r}")
        start, end = self.time_range
        if start > end:
            raise ValueError(f"time range reversed: {start} > {end}")

    def to_json_obj(self) -> dict:
        return {
            "rewritten_text": self.rewritten_text,
            "time_range": {"start": self.time_range[0], "end": self.time_range[1]},
            "location": self.location,
            "objects": list(self.objects),
            "output_format": self.output_format,
            "defaulted_time": self.defaulted_time,
            "original_text": self.original_text,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ParsedIntent":
        return cls(
            rewritten_text=obj["rewritten_text"],
            time_range=(obj["time_range"]["start"], obj["time_range"]["end"]),
            location=obj.get("location", ""),
            objects=tuple(obj.get("objects", [])),
            output_format=obj.get("output_format", "auto"),
            defaulted_time=bool(obj.get("defaulted_time", False)),
            original_text=obj.get("original_text", ""),
        )


@dataclass
class TaskSelection:
    entries: list  # ordered [(task_name, instruction)]

    def __post_init__(self):
        if not self.entries:
            raise NoTaskApplicable("no task selected")
        seen = set()
        for name, _ in self.entries:
            if name not in TASK_NAMES:
                raise ValueError(f"unknown task {name!r}")
            if name in seen:
                raise ValueError(f"task {name!r} selected twice")
            seen.add(name)

    @property
    def task_names(self) -> list:
        return [name for name, _ in self.entries]

    def instruction(self, task_name: str) -> str:
        for name, text in self.entries:
            if name == task_name:
                return text
        raise KeyError(task_name)

    def to_json_obj(self) -> dict:
        return {"tasks": [{"name": n, "instruction": t} for n, t in self.entries]}


# -- plan model -------------------------------------------------------------


@dataclass(frozen=True)
class Call:
    function_name: str
    args: tuple
    output_name: str
    description: str


@dataclass(frozen=True)
class PlanStep:
    calls: tuple  # parallel when more than one


@dataclass(frozen=True)
class LoopStep:
    over: object  # literal list or a string expression ("result3")
    var: str
    body: tuple  # Calls, serial per item


@dataclass(frozen=True)
class WorkflowPlan:
    steps: tuple

    def output_names(self) -> list:
        out = []
        for step in self.steps:
            for call in (step.body if isinstance(step, LoopStep) else step.calls):
                out.append(call.output_name)
        return out

    def calls(self):
        for index, step in enumerate(self.steps, start=1):
            for call in (step.body if isinstance(step, LoopStep) else step.calls):
                yield index, step, call


def _freeze(value):
    return tuple(_freeze(v) for v in value) if isinstance(value, list) else value


def _thaw(value):
    return [_thaw(v) for v in value] if isinstance(value, tuple) else value


def _parse_call_group(obj: dict, where: str) -> tuple:
    calls = []
    index = 1
    expected_keys = 0
    while f"function{index}" in obj:
        missing = [
            key for key in (f"arg{index}", f"output{index}", f"description{index}")
            if key not in obj
        ]
        if missing:
            raise PlanUnserializable(f"{where}: call {index} missing {missing[0]}")
        args = obj[f"arg{index}"]
        if not isinstance(args, list):
            raise PlanUnserializable(f"{where}: arg{index} must be a list")
        name = obj[f"function{index}"]
        output = obj[f"output{index}"]
        if not isinstance(name, str) or not isinstance(output, str):
            raise PlanUnserializable(f"{where}: call {index} names must be strings")
        calls.append(Call(
            function_name=name,
            args=_freeze(args),
            output_name=output,
            description=str(obj[f"description{index}"]),
        ))
        expected_keys += 4
        index += 1
    if not calls:
        raise PlanUnserializable(f"{where}: no function1 entry")
    if len(obj) != expected_keys:
        extra = sorted(set(obj) - {
            f"{kind}{i}" for i in range(1, index)
            for kind in ("arg", "function", "output", "description")
        })
        raise PlanUnserializable(f"{where}: unexpected keys {extra}")
    return tuple(calls)


def parse_plan(source: str | dict) -> WorkflowPlan:
    if isinstance(source, str):
        try:
            obj = json.loads(source)
        except json.JSONDecodeError as exc:
            raise PlanUnserializable(f"plan is not JSON: {exc}") from None
    else:
        obj = source
    if not isinstance(obj, dict) or not obj:
        raise PlanUnserializable("plan must be a non-empty JSON object")

    steps = []
    for position, (key, step_obj) in enumerate(obj.items(), start=1):
        if key != f"step{position}":
            raise PlanUnserializable(f"expected key step{position}, found {key!r}")
        if not isinstance(step_obj, dict):
            raise PlanUnserializable(f"{key} must be an object")
        if "loop" in step_obj:
            if len(step_obj) != 1:
                raise PlanUnserializable(f"{key}: loop step carries only the loop key")
            loop = step_obj["loop"]
            missing = [k for k in ("over", "var", "body") if k not in loop]
            if missing:
                raise PlanUnserializable(f"{key}: loop missing {missing[0]}")
            if not isinstance(loop["body"], list) or not loop["body"]:
                raise PlanUnserializable(f"{key}: loop body must be a non-empty list")
            body = []
            for i, call_obj in enumerate(loop["body"], start=1):
                group = _parse_call_group(call_obj, f"{key} body[{i}]")
                if len(group) != 1:
                    raise PlanUnserializable(f"{key}: body entries hold one call each")
                body.append(group[0])
            steps.append(LoopStep(over=_freeze(loop["over"]), var=loop["var"], body=tuple(body)))
        else:
            steps.append(PlanStep(calls=_parse_call_group(step_obj, key)))
    return WorkflowPlan(steps=tuple(steps))


def _call_obj(call: Call, index: int) -> dict:
    return {
        f"arg{index}": _thaw(list(call.args)),
        f"function{index}": call.function_name,
        f"output{index}": call.output_name,
        f"description{index}": call.description,
    }


def plan_to_json_obj(plan: WorkflowPlan) -> dict:
    out: dict = {}
    for position, step in enumerate(plan.steps, start=1):
        if isinstance(step, LoopStep):
            out[f"step{position}"] = {"loop": {
                "over": _thaw(step.over),
                "var": step.var,
                "body": [_call_obj(c, 1) for c in step.body],
            }}
        else:
            merged: dict = {}
            for i, call in enumerate(step.calls, start=1):
                merged.update(_call_obj(call, i))
            out[f"step{position}"] = merged
    return out


def serialize_plan(plan: WorkflowPlan) -> str:
    return json.dumps(plan_to_json_obj(plan), ensure_ascii=False, indent=2) + "\n"


# -- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    step: int
    code: str
    message: str


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_json_obj(self) -> dict:
        return {
            "ok": self.ok,
            "errors": [vars(i) for i in self.errors],
            "warnings": [vars(i) for i in self.warnings],
        }


def _references(value, found: list) -> None:
    if isinstance(value, str) and _RESULT_RE.match(value):
        found.append(value)
    elif isinstance(value, (list, tuple)):
        for item in value:
            _references(item, found)


def validate_plan(plan: WorkflowPlan, records, hybrid_enabled: bool = True) -> ValidationReport:
    by_name = {r.name: r for r in records}
    report = ValidationReport()
    produced: set = set()
    all_outputs: set = set()

    for position, step in enumerate(plan.steps, start=1):
        is_loop = isinstance(step, LoopStep)
        calls = step.body if is_loop else step.calls
        visible = set(produced)  # outputs usable by this step's calls
        if is_loop:
            refs: list = []
            _references(step.over, refs)
            for ref in refs:
                if ref not in produced:
                    report.errors.append(Issue(
                        position, "DataflowError",
                        f"loop over references {ref} before any step produces it",
                    ))
        for call in calls:
            if call.output_name in all_outputs:
                report.errors.append(Issue(
                    position, "DataflowError",
                    f"output {call.output_name} produced twice",
                ))
            all_outputs.add(call.output_name)

            refs = []
            _references(call.args, refs)
            for ref in refs:
                if ref not in visible:
                    report.errors.append(Issue(
                        position, "DataflowError",
                        f"arg references {ref} before any step produces it",
                    ))

            record = by_name.get(call.function_name)
            if record is None:
                if hybrid_enabled:
                    goal = call.description or call.function_name
                    report.warnings.append(Issue(
                        position, "HybridFallback",
                        f"no interface for {call.function_name!r}; "
                        f"will generate code for: {goal}",
                    ))
                else:
                    report.errors.append(Issue(
                        position, "UnknownInterface",
                        f"unknown function {call.function_name!r} and hybrid is disabled",
                    ))
            elif len(call.args) != len(record.params):
                report.errors.append(Issue(
                    position, "ArityError",
                    f"{call.function_name} takes {len(record.params)} args, got {len(call.args)}",
                ))
            else:
                for param, arg in zip(record.params, call.args):
                    takes_ref = isinstance(arg, str) and _RESULT_RE.match(arg)
                    takes_ref = takes_ref or (
                        isinstance(arg, tuple)
                        and all(isinstance(a, str) and _RESULT_RE.match(a) for a in arg)
                    )
                    if is_loop and arg == step.var:
                        takes_ref = True  # loop variable binds at expansion
                    if param["semantic_type"] == "table" and not takes_ref:
                        report.errors.append(Issue(
                            position, "TypeMismatch",
                            f"{call.function_name} param {param['name']} expects a "
                            f"result reference, got {arg!r}",
                        ))
            if is_loop:
                visible.add(call.output_name)  # serial within the body
        if not is_loop:
            visible.update(c.output_name for c in calls)
        produced.update(c.output_name for c in calls)
    return report


# -- planner ----------------------------------------------------------------


def _json_payload(text: str) -> dict:
    """Model replies may wrap JSON in a code fence; unwrap and parse."""
    body = text.strip()
    if body.startswith("```"):
        body = re.sub(r"^```[a-z]*\n", "", body)
        body = re.sub(r"\n```$", "", body.rstrip())
    return json.loads(body)


def _year_earlier(iso_day: str) -> str:
    day = datetime.date.fromisoformat(iso_day)
    try:
        return day.replace(year=day.year - 1).isoformat()
    except ValueError:  # Feb 29
        return day.replace(year=day.year - 1, day=28).isoformat()


class Planner:
    """Stateless per request; prompt_log records every outbound prompt."""

    def __init__(self, gateway, registry, config):
        self.gateway = gateway
        self.registry = registry
        self.config = config
        self.prompt_log: list = []

    def _complete(self, op: str, messages: list) -> str:
        self.prompt_log.append({"op": op, "texts": [m.text for m in messages]})
        return self.gateway.complete("deployer", messages).text

    # -- intent --

    def analyze_intent(self, request_text: str) -> ParsedIntent:
        if not request_text or not request_text.strip():
            raise UnparseableRequest("empty request")
        clock, locale = self.config.clock, self.config.locale
        messages = [
            ChatMessage("system",
                        "You extract structured intent from data analysis requests. "
                        "Reply with a single JSON object and nothing else."),
            ChatMessage("user",
                        f"Today is {clock}. Default region: {locale}.\n"
                        f"Request: {request_text.strip()}\n"
                        "Return JSON with keys: rewritten_text (the request restated with "
                        "explicit time, place and objects), time_range ({start, end} ISO "
                        "dates, or null if the request names no time), location, objects "
                        "(list of entity names), output_format (one of line, bar, kline, "
                        "table, text, radar, auto)."),
        ]
        try:
            raw = _json_payload(self._complete("intent", messages))
        except (json.JSONDecodeError, ValueError) as exc:
            raise UnparseableRequest(f"intent reply was not JSON: {exc}") from None

        defaulted = False
        window = raw.get("time_range")
        if window:
            try:
                start = normalize_date(str(window["start"]))
                end = normalize_date(str(window["end"]))
            except (KeyError, ValueError) as exc:
                raise UnparseableRequest(f"bad time_range in intent reply: {exc}") from None
        else:
            start, end, defaulted = _year_earlier(clock), clock, True

        fmt = raw.get("output_format") or "auto"
        if fmt not in OUTPUT_FORMATS:
            raise UnparseableRequest(f"bad output_format {fmt!r} in intent reply")
        if fmt == "auto":
            fmt = self._resolve_auto(start, end)
        try:
            return ParsedIntent(
                rewritten_text=str(raw.get("rewritten_text") or request_text.strip()),
                time_range=(start, end),
                location=str(raw.get("location") or self.config.locale),
                objects=tuple(raw.get("objects") or ()),
                output_format=fmt,
                defaulted_time=defaulted,
                original_text=request_text.strip(),
            )
        except ValueError as exc:
            raise UnparseableRequest(str(exc)) from None

    @staticmethod
    def _resolve_auto(start: str, end: str) -> str:
        """A window longer than a quarter reads as a time series: line chart."""
        span = datetime.date.fromisoformat(end) - datetime.date.fromisoformat(start)
        return "line" if span.days > 92 else "table"

    # -- task selection --

    def select_tasks(self, intent: ParsedIntent) -> TaskSelection:
        messages = [
            ChatMessage("system",
                        "You route a parsed request to analysis tasks. Reply with a "
                        "single JSON object and nothing else."),
            ChatMessage("user",
                        f"Intent: {json.dumps(intent.to_json_obj(), ensure_ascii=False)}\n"
                        "Choose from stock_task, fund_task, economic_task, "
                        "visualization_task. Return JSON {\"tasks\": [{\"name\", "
                        "\"instruction\"}]} in execution order."),
        ]
        try:
            raw = _json_payload(self._complete("tasks", messages))
            proposed = [(t["name"], str(t.get("instruction", ""))) for t in raw["tasks"]]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise NoTaskApplicable(f"task reply unusable: {exc}") from None

        entries = []
        seen: set = set()
        for name, instruction in proposed:
            if name in TASK_NAMES and name not in seen:
                entries.append((name, instruction))
                seen.add(name)

        # visualization accompanies every graphical or tabular format, never text
        needs_viz = intent.output_format != "text"
        if needs_viz and "visualization_task" not in seen:
            artifact = "table" if intent.output_format == "table" else f"{intent.output_format} chart"
            entries.append(("visualization_task", f"Render the result as a {artifact}"))
        if not needs_viz:
            entries = [(n, t) for n, t in entries if n != "visualization_task"]
        if not any(n != "visualization_task" for n, _ in entries):
            raise NoTaskApplicable("no data task applies to this request")
        return TaskSelection(entries=entries)

    # -- retrieval --

    def retrieve(self, selection: TaskSelection) -> list:
        tags: set = set()
        for name in selection.task_names:
            tags.update(TASK_TAGS.get(name, ()))
        if not tags:  # visualization-only selection cannot happen, but stay total
            tags = set().union(*TASK_TAGS.values())
        records = {
            r.id: r
            for r in self.registry.hierarchical_lookup(sorted(tags), DATA_CATEGORIES)
        }
        if "visualization_task" in selection.task_names:
            for r in self.registry.hierarchical_lookup(sorted(tags), ("visualization",)):
                records[r.id] = r
        return [records[k] for k in sorted(records)]

    # -- planning --

    def plan_workflow(self, intent: ParsedIntent, selection: TaskSelection,
                      interfaces: list) -> WorkflowPlan:
        listing = "\n".join(f"- {r.prompt_text()}" for r in interfaces)
        messages = [
            ChatMessage("system",
                        "You compose workflow plans from a fixed interface list. Reply "
                        "with a single JSON object and nothing else."),
            ChatMessage("user",
                        f"Intent: {json.dumps(intent.to_json_obj(), ensure_ascii=False)}\n"
                        f"Tasks: {json.dumps(selection.to_json_obj(), ensure_ascii=False)}\n"
                        f"Interfaces:\n{listing}\n"
                        "Emit the plan as JSON: {\"step1\": {\"arg1\": [...], "
                        "\"function1\": \"name\", \"output1\": \"result1\", "
                        "\"description1\": \"...\"}, ...}. Parallel calls continue with "
                        "arg2/function2/output2/description2. A loop step is "
                        "{\"loop\": {\"over\": [...], \"var\": \"item\", \"body\": "
                        "[call objects]}}. Use only the listed interfaces; for any "
                        "sub-goal they cannot cover, call __raw_code__ with the goal in "
                        "the description instead of inventing a name."),
        ]
        reply = self._complete("plan", messages)
        try:
            return parse_plan(_json_payload(reply))
        except (json.JSONDecodeError, ValueError) as exc:
            raise PlanUnserializable(f"plan reply was not JSON: {exc}") from None

    def plan_request(self, request_text: str):
        """Full front half; returns (intent, selection, interfaces, plan, report)."""
        intent = self.analyze_intent(request_text)
        selection = self.select_tasks(intent)
        interfaces = self.retrieve(selection)
        plan = self.plan_workflow(intent, selection, interfaces)
        report = validate_plan(plan, interfaces, self.config.executor.hybrid_enabled)
        return intent, selection, interfaces, plan, report
