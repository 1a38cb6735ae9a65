"""Interface lifecycle: design, test-case generation, certification, merging.

Drafts come from the explorer tier as body-language source. Certification
replays generated cases and repairs the body from diagnostics, at most R
rounds; a body that still fails stays draft and never enters the library.
Merging replays the union of the originals' suites through the merged
body and demands exact output equality before the registry swap.
"""

from __future__ import annotations

import json
import re
import zlib
from dataclasses import dataclass, field, replace

from .bodylang import parse_and_check
from .bodylang.diagnostics import Diagnostics
from .bodylang.interpreter import run_body
from .charts import ChartSpec
from .errors import (
    ExplorationInterrupted,
    InvalidConfig,
    ProviderUnavailable,
    TapeMiss,
)
from .llm import ChatMessage
from .llm.embedding import cosine, embed
from .planner import _json_payload, validate_plan
from .registry import CATEGORIES, InterfaceRecord, TestCase
from .tables import DataTable

# where case sampling draws from when a body never fetches (pure
# table-in table-out interfaces); keyed by the record's task tags
_SAMPLE_SOURCE_BY_TAG = {
    "stock": "stock.daily",
    "fund": "fund.nav",
    "corporation": "corp.financials",
    "other": "econ.gdp",
}

TABLE_PLACEHOLDER = "__table__"

_FETCH_RE = re.compile(r'fetch\(\s*"([^"]+)"')
_FENCE_RE = re.compile(r"```[a-z]*\n(.*?)```", re.DOTALL)


def _body_payload(text: str) -> str:
    match = _FENCE_RE.search(text)
    return (match.group(1) if match else text).strip() + "\n"


@dataclass
class DesignOutcome:
    reused: list  # ids of existing records that cover the request
    drafted: list  # new InterfaceRecords, state draft
    oracles: dict  # name -> independent reference body, when provided
    sketch: str = ""

    @property
    def covered_by_reuse(self) -> bool:
        return not self.drafted


@dataclass
class FailureReport:
    interface_id: str
    name: str
    repairs_used: int
    unresolved: list  # [{case_id, diagnostics}]


@dataclass
class CertifyOutcome:
    certified: InterfaceRecord | None
    cases: list
    repairs: int
    report: FailureReport | None = None

    @property
    def ok(self) -> bool:
        return self.certified is not None


@dataclass
class MergeProposal:
    """Decision artifact for folding similar interfaces into one.

    call_mappings translate an original's bindings into the merged
    signature: {"params": {orig: merged}, "fixed": {merged: literal},
    "listify": [merged params whose copied value gets wrapped in a list]}.
    """

    new_interface_id: str
    candidate_ids: list
    similarity_scores: list  # descending, aligned with candidate_ids
    decision: str  # merge | keep
    target_ids: list = field(default_factory=list)
    target_spec: dict | None = None
    call_mappings: dict = field(default_factory=dict)
    rationale: str = ""


@dataclass
class MergeOutcome:
    merged: InterfaceRecord | None
    original_ids: list
    repairs: int
    report: dict | None = None

    @property
    def ok(self) -> bool:
        return self.merged is not None


class Forge:
    def __init__(self, gateway, registry, catalog, config):
        self.gateway = gateway
        self.registry = registry
        self.catalog = catalog
        self.config = config
        self.parsing_files = [
            catalog.generate_parsing_file(sid) for sid in catalog.source_ids()
        ]
        self._next_id = 1

    def _complete(self, prompt: str) -> str:
        return self.gateway.complete("explorer", [ChatMessage("user", prompt)]).text

    def allocate_id(self) -> str:
        # records can enter the registry outside this forge (imports, seeds),
        # so take the ceiling over both counters every time
        in_registry = max(
            (int(m.group(1)) for m in (
                re.match(r"if-(\d+)$", rid) for rid in self.registry._records
            ) if m),
            default=0,
        )
        n = max(self._next_id, in_registry + 1)
        self._next_id = n + 1
        return f"if-{n:03d}"

    # -- design -------------------------------------------------------------

    def design_interface(self, request) -> DesignOutcome:
        """Draft the missing interfaces for a verified request, reusing first.

        A draft body is not parsed here; an unparsable draft surfaces as
        failing cases inside certify, where the repair loop can fix it.
        """
        library = self.registry.active_records()
        library_lines = "\n".join(f"- {r.prompt_text()}" for r in library) or "- (empty)"
        source_lines = "\n".join(pf.to_prompt_text() for pf in self.parsing_files)
        prompt = (
            "Design interfaces for the request.\n"
            f"Request: {request.text}\n"
            f"Library:\n{library_lines}\n"
            f"Data sources:\n{source_lines}\n"
            "Prefer existing interfaces; draft only what is missing. Reply with "
            'JSON {"reused": ["name"], "new": [{"name", "params": [{"name", '
            '"semantic_type", "description"}], "description", "category", '
            '"task_tags", "body", "oracle"?}], "sketch": "..."}. Bodies are '
            "straight-line scripts of the builtin table language; oracle, when "
            "given, is an independent reference body used to label test cases."
        )
        reply = _json_payload(self._complete(prompt))

        reused = []
        for name in reply.get("reused", []):
            record = self.registry.by_name(name)
            if record is None:
                raise ValueError(f"design reuses unknown interface {name!r}")
            reused.append(record.id)

        drafted = []
        oracles = {}
        for spec in reply.get("new", []):
            record = InterfaceRecord(
                id=self.allocate_id(),
                name=spec["name"],
                params=list(spec["params"]),
                description=spec["description"],
                category=spec["category"],
                task_tags=frozenset(spec["task_tags"]),
                body=spec["body"],
                state="draft",
            )
            drafted.append(record)
            if spec.get("oracle"):
                oracles[record.name] = spec["oracle"]
        return DesignOutcome(
            reused=reused, drafted=drafted, oracles=oracles,
            sketch=reply.get("sketch", ""),
        )

    # -- test cases ---------------------------------------------------------

    def _sample_source(self, interface: InterfaceRecord, oracle: str | None) -> str:
        texts = (interface.body, oracle or "")
        for text in texts:
            match = _FETCH_RE.search(text)
            if match:
                return match.group(1)
        # fetch through a variable: any string literal naming a real source
        known = set(self.catalog.source_ids())
        for text in texts:
            for literal in re.findall(r'"([^"]+)"', text):
                if literal in known:
                    return literal
        for tag in sorted(interface.task_tags):
            if tag in _SAMPLE_SOURCE_BY_TAG:
                return _SAMPLE_SOURCE_BY_TAG[tag]
        return "stock.daily"

    def generate_test_cases(self, interface: InterfaceRecord, K: int, seed: int,
                            oracle: str | None = None) -> list:
        """K cases from seeded catalog samples.

        Acquisition interfaces use the sampled record itself as the
        expected answer; computed interfaces run the oracle body (or the
        draft body when none is given) over the sample to label it.
        """
        if K < 1:
            raise InvalidConfig(f"need at least one test case, got K={K}")
        source_id = self._sample_source(interface, oracle)
        self.catalog.source(source_id)  # raises UnknownSource early
        acquisition = interface.category == "data_acquisition"
        rows = 1 if acquisition else 8
        cols = len(self.catalog.source(source_id).schema)

        oracle_program = None
        if not acquisition:
            oracle_program = parse_and_check(oracle or interface.body)
            if isinstance(oracle_program, Diagnostics):
                raise InvalidConfig(
                    f"oracle for {interface.name} does not parse: "
                    f"{oracle_program.render()}"
                )

        cases = []
        for i in range(K):
            case_seed = seed * 1000 + i
            sample = self.catalog.sample_subtable(source_id, rows, cols, case_seed)
            prompt = (
                f"Write a test invocation for {interface.signature()}.\n"
                f"Purpose: {interface.description}\n"
                "Params: " + "; ".join(
                    f"{p['name']} ({p['semantic_type']})" for p in interface.params
                ) + "\n"
                f"Sampled data from {source_id}:\n{sample.to_csv_text()}"
                'Reply with JSON {"request_text": "...", "bindings": {...}} '
                f'binding every param; use "{TABLE_PLACEHOLDER}" wherever the '
                "sampled table itself is the argument."
            )
            reply = _json_payload(self._complete(prompt))
            bindings = reply["bindings"]
            missing = [p["name"] for p in interface.params if p["name"] not in bindings]
            if missing:
                raise ValueError(
                    f"case bindings for {interface.name} miss params {missing}"
                )

            provenance = {
                "source": source_id, "seed": case_seed, "rows": rows, "cols": cols,
            }
            if acquisition:
                expected = sample
            else:
                outcome = run_body(
                    oracle_program,
                    _resolve_placeholders(bindings, sample),
                    self.catalog,
                )
                if isinstance(outcome, Diagnostics):
                    raise InvalidConfig(
                        f"oracle for {interface.name} failed on case {i + 1}: "
                        f"{outcome.render()}"
                    )
                expected = (
                    outcome.to_json_obj() if isinstance(outcome, ChartSpec) else outcome
                )
            cases.append(TestCase(
                id=f"{interface.id}-c{i + 1}",
                request_text=reply["request_text"],
                input_bindings=bindings,
                expected=expected,
                provenance=provenance,
            ))
        return cases

    def resolved_bindings(self, case: TestCase) -> dict:
        p = case.provenance
        sample = self.catalog.sample_subtable(
            p["source"], p["rows"], p["cols"], p["seed"]
        )
        return _resolve_placeholders(case.input_bindings, sample)

    # -- certification ------------------------------------------------------

    def run_case(self, body_program, case: TestCase):
        """Returns (ok, diagnostics text or None)."""
        outcome = run_body(body_program, self.resolved_bindings(case), self.catalog)
        if isinstance(outcome, Diagnostics):
            return False, outcome.render()
        actual = outcome.to_json_obj() if isinstance(outcome, ChartSpec) else outcome
        if actual == case.expected:
            return True, None
        return False, _mismatch_text(actual, case.expected)

    def _run_suite(self, body: str, cases: list) -> list:
        """Failures as [{case_id, diagnostics}]; empty when everything passes."""
        program = parse_and_check(body)
        if isinstance(program, Diagnostics):
            text = program.render()
            return [{"case_id": c.id, "diagnostics": text} for c in cases]
        failures = []
        for case in cases:
            ok, diagnostics = self.run_case(program, case)
            if not ok:
                failures.append({"case_id": case.id, "diagnostics": diagnostics})
        return failures

    def certify(self, interface: InterfaceRecord, cases: list,
                max_repairs: int | None = None) -> CertifyOutcome:
        if interface.state != "draft":
            raise ValueError(f"{interface.name} is {interface.state}, expected draft")
        rounds = self.config.forge.repair_rounds if max_repairs is None else max_repairs
        body = interface.body
        by_id = {c.id: c for c in cases}
        for repairs in range(rounds + 1):
            failures = self._run_suite(body, cases)
            if not failures:
                for case in cases:
                    case.status = "pass"
                certified = replace(
                    interface,
                    body=body,
                    state="tested",
                    version=interface.version + repairs,
                    test_case_ids=[c.id for c in cases],
                )
                return CertifyOutcome(certified=certified, cases=cases, repairs=repairs)
            if repairs == rounds:
                break
            first = failures[0]
            case = by_id[first["case_id"]]
            prompt = (
                "Fix the interface body.\n"
                f"Interface: {interface.signature()}\n"
                f"Purpose: {interface.description}\n"
                f"Current body:\n{body}\n"
                f"Failing request: {case.request_text}\n"
                f"Bindings: {json.dumps(case.input_bindings, ensure_ascii=False)}\n"
                f"Failure:\n{first['diagnostics']}\n"
                "Reply with the corrected body only, in a code fence."
            )
            body = _body_payload(self._complete(prompt))
        for case in cases:
            case.status = "fail" if any(
                f["case_id"] == case.id for f in failures
            ) else "pass"
        return CertifyOutcome(
            certified=None,
            cases=cases,
            repairs=rounds,
            report=FailureReport(
                interface_id=interface.id,
                name=interface.name,
                repairs_used=rounds,
                unresolved=failures,
            ),
        )

    # -- merging ------------------------------------------------------------

    def propose_merge(self, new_interface: InterfaceRecord,
                      N: int | None = None) -> MergeProposal:
        if new_interface.state != "tested":
            raise ValueError(f"{new_interface.name} must be tested before merging")
        top_n = self.config.forge.top_n if N is None else N
        threshold = self.config.registry.merge_consult_threshold
        anchor = embed(new_interface.retrieval_text())
        scored = sorted(
            (
                (cosine(anchor, embed(r.retrieval_text())), r)
                for r in self.registry.active_records()
                if r.id != new_interface.id
            ),
            key=lambda pair: pair[0],
            reverse=True,
        )[:top_n]
        candidate_ids = [r.id for _, r in scored]
        scores = [round(s, 6) for s, _ in scored]
        keep = lambda why: MergeProposal(  # noqa: E731
            new_interface_id=new_interface.id,
            candidate_ids=candidate_ids,
            similarity_scores=scores,
            decision="keep",
            rationale=why,
        )
        if not scored:
            return keep("library holds no other interface")
        if scores[0] < threshold:
            return keep(
                f"closest interface scores {scores[0]:.2f}, below the "
                f"{threshold:.2f} consult threshold"
            )

        lines = []
        for score, record in scored:
            lines.append(f"[{score:.2f}] {record.prompt_text()}\n  body:\n{record.body}")
        prompt = (
            "Decide whether to merge similar interfaces.\n"
            f"New interface: {new_interface.prompt_text()}\n"
            f"  body:\n{new_interface.body}\n"
            "Candidates:\n" + "\n".join(lines) + "\n"
            "Merge only when one interface can serve every original call via "
            'parameter mapping. Reply {"decision": "keep", "rationale": "..."} '
            'or {"decision": "merge", "targets": ["name"], "merged": {"name", '
            '"params", "description", "category", "task_tags", "body"}, '
            '"call_mappings": {original_name: {"params": {orig: merged}, '
            '"fixed": {merged: literal}, "listify": [merged]}}, "rationale"}.'
        )
        reply = _json_payload(self._complete(prompt))
        if reply.get("decision") != "merge":
            return keep(reply.get("rationale", "model chose keep"))

        by_name = {self.registry.get(rid).name: rid for rid in candidate_ids}
        target_ids = []
        for name in reply["targets"]:
            if name not in by_name:
                raise ValueError(f"merge targets unknown candidate {name!r}")
            target_ids.append(by_name[name])
        return MergeProposal(
            new_interface_id=new_interface.id,
            candidate_ids=candidate_ids,
            similarity_scores=scores,
            decision="merge",
            target_ids=target_ids,
            target_spec=reply["merged"],
            call_mappings=reply["call_mappings"],
            rationale=reply.get("rationale", ""),
        )

    def translate_bindings(self, original: InterfaceRecord, case: TestCase,
                           mapping: dict) -> dict:
        out = dict(mapping.get("fixed", {}))
        param_map = mapping.get("params", {})
        listify = set(mapping.get("listify", []))
        for p in original.params:
            name = p["name"]
            if name not in param_map:
                raise ValueError(
                    f"call mapping for {original.name} drops param {name!r}"
                )
            value = case.input_bindings[name]
            merged_name = param_map[name]
            out[merged_name] = [value] if merged_name in listify else value
        return out

    def merge_and_validate(self, proposal: MergeProposal,
                           max_repairs: int | None = None) -> MergeOutcome:
        if proposal.decision != "merge":
            raise ValueError("proposal decision is not merge")
        rounds = (
            self.config.forge.merge_repair_rounds if max_repairs is None else max_repairs
        )
        original_ids = [proposal.new_interface_id] + list(proposal.target_ids)
        originals = [self.registry.get(rid) for rid in original_ids]
        spec = proposal.target_spec
        merged_id = self.allocate_id()

        # regression suite: every original case, bindings translated into
        # the merged signature, expected answers unchanged
        suite = []
        for original in originals:
            mapping = proposal.call_mappings[original.name]
            for case in self.registry.cases_for(original):
                provenance = dict(case.provenance)
                provenance["translated_from"] = case.id
                suite.append(TestCase(
                    id=f"{merged_id}-c{len(suite) + 1}",
                    request_text=case.request_text,
                    input_bindings=self.translate_bindings(original, case, mapping),
                    expected=case.expected,
                    provenance=provenance,
                ))

        body = spec["body"]
        for repairs in range(rounds + 1):
            failures = self._run_suite(body, suite)
            if not failures:
                for case in suite:
                    case.status = "pass"
                merged = InterfaceRecord(
                    id=merged_id,
                    name=spec["name"],
                    params=list(spec["params"]),
                    description=spec["description"],
                    category=spec["category"],
                    task_tags=frozenset(
                        spec.get("task_tags")
                        or set().union(*(r.task_tags for r in originals))
                    ),
                    body=body,
                    state="tested",
                    version=1 + repairs,
                    test_case_ids=[c.id for c in suite],
                )
                self.registry.record_merge(merged, original_ids, cases=suite)
                return MergeOutcome(
                    merged=merged, original_ids=original_ids, repairs=repairs
                )
            if repairs == rounds:
                break
            first = failures[0]
            case = next(c for c in suite if c.id == first["case_id"])
            prompt = (
                "Fix the merged interface body.\n"
                f"Merged interface: {spec['name']}("
                + ", ".join(p["name"] for p in spec["params"]) + ")\n"
                f"Current body:\n{body}\n"
                f"Failing request: {case.request_text}\n"
                f"Bindings: {json.dumps(case.input_bindings, ensure_ascii=False)}\n"
                f"Failure:\n{first['diagnostics']}\n"
                "Outputs must stay byte-equal to the originals. Reply with the "
                "corrected body only, in a code fence."
            )
            body = _body_payload(self._complete(prompt))
        # abandoned: registry untouched, originals keep serving
        return MergeOutcome(
            merged=None,
            original_ids=original_ids,
            repairs=rounds,
            report={
                "merged_name": spec.get("name", "?"),
                "unresolved": failures,
                "repairs_used": rounds,
            },
        )


def _resolve_placeholders(value, sample: DataTable):
    if value == TABLE_PLACEHOLDER:
        return sample
    if isinstance(value, list):
        return [_resolve_placeholders(v, sample) for v in value]
    if isinstance(value, dict):
        return {k: _resolve_placeholders(v, sample) for k, v in value.items()}
    return value


def _mismatch_text(actual, expected) -> str:
    def show(value) -> str:
        if isinstance(value, DataTable):
            return value.to_csv_text()
        return json.dumps(value, ensure_ascii=False, default=str)

    return f"output differs from expected.\nexpected:\n{show(expected)}\ngot:\n{show(actual)}"


# -- exploration loop -------------------------------------------------------


def plan_coverable(planner, text: str) -> bool:
    """Dry-run: can the current library alone carry a validated plan?"""
    from .errors import NoTaskApplicable, PlanUnserializable, UnparseableRequest

    try:
        intent = planner.analyze_intent(text)
        selection = planner.select_tasks(intent)
        interfaces = planner.retrieve(selection)
        plan = planner.plan_workflow(intent, selection, interfaces)
    except (UnparseableRequest, NoTaskApplicable, PlanUnserializable):
        return False
    report = validate_plan(plan, interfaces, hybrid_enabled=False)
    return not report.errors


def case_seed_for(name: str) -> int:
    # stable per interface name, independent of design order
    return zlib.crc32(name.encode("utf-8")) % 100_000


def run_exploration(forge: Forge, planner, requests: list, merge: bool = True,
                    K: int | None = None, on_event=None,
                    checkpoint_path=None) -> dict:
    """Design/test/merge until every request is coverable or logged uncovered.

    Provider failures abort with a checkpoint naming the requests already
    handled; a rerun with the same checkpoint path skips them.
    """
    emit = on_event or (lambda kind, **payload: None)
    cases_per_interface = forge.config.forge.test_cases if K is None else K
    registry = forge.registry

    done: set = set()
    if checkpoint_path is not None and checkpoint_path.exists():
        done = set(json.loads(checkpoint_path.read_text(encoding="utf-8"))["done"])

    def save_checkpoint() -> None:
        if checkpoint_path is not None:
            checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
            checkpoint_path.write_text(
                json.dumps({"done": sorted(done)}, ensure_ascii=False) + "\n",
                encoding="utf-8",
            )

    merge_events = []
    try:
        for request in requests:
            if request.text in done:
                continue
            emit("request", text=request.text)
            if plan_coverable(planner, request.text):
                done.add(request.text)
                continue

            outcome = forge.design_interface(request)
            emit("design", reused=outcome.reused,
                 drafted=[r.name for r in outcome.drafted])
            for draft in outcome.drafted:
                cases = forge.generate_test_cases(
                    draft, cases_per_interface,
                    seed=case_seed_for(draft.name),
                    oracle=outcome.oracles.get(draft.name),
                )
                cert = forge.certify(draft, cases)
                if not cert.ok:
                    emit("certify_failed", name=draft.name,
                         unresolved=len(cert.report.unresolved))
                    continue
                registry.insert(cert.certified, cases)
                emit("certified", name=draft.name, repairs=cert.repairs)
                if not merge:
                    continue
                proposal = forge.propose_merge(cert.certified)
                if proposal.decision != "merge":
                    continue
                merged = forge.merge_and_validate(proposal)
                if merged.ok:
                    merge_events.append({
                        "merged": merged.merged.name,
                        "originals": [
                            registry.get(rid).name for rid in merged.original_ids
                        ],
                    })
                    emit("merged", name=merged.merged.name,
                         originals=merged.original_ids)

            if not plan_coverable(planner, request.text):
                registry.log_uncovered(
                    request.text,
                    "planner cannot cover the request with the current library",
                    timestamp=forge.config.clock,
                )
                emit("uncovered", text=request.text)
            done.add(request.text)
            save_checkpoint()
    except (TapeMiss, ProviderUnavailable) as exc:
        save_checkpoint()
        raise ExplorationInterrupted(
            str(exc),
            checkpoint_path=str(checkpoint_path) if checkpoint_path else None,
        ) from exc

    snapshot_path = registry.export_snapshot(created_at=forge.config.clock)
    actives = registry.active_records()
    categories = {c: 0 for c in CATEGORIES}
    for record in actives:
        categories[record.category] += 1
    open_uncovered = [e.request_text for e in registry.uncovered_entries("open")]
    return {
        "snapshot_path": str(snapshot_path),
        "version": registry.next_snapshot_version() - 1,
        "interfaces": len(actives),
        "categories": categories,
        "covered": sorted(done - set(open_uncovered)),
        "uncovered": open_uncovered,
        "merges": merge_events,
    }
