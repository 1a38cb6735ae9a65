"""Interface design, case generation, certification, merge, exploration loop."""

import csv
import io
import json
from pathlib import Path

import pytest

from copilot.config import EngineConfig
from copilot.errors import (
    ExplorationInterrupted,
    InvalidConfig,
    TapeMiss,
    UnknownSource,
)
from copilot.exploration import Request
from copilot.forge import (
    Forge,
    MergeProposal,
    plan_coverable,
    run_exploration,
)
from copilot.llm.gateway import callable_gateway
from copilot.planner import Planner
from copilot.registry import InterfaceRecord, Registry
from copilot.tables import DataTable

# frozen bodies; descriptions share templates so the similarity scores
# used by merge tests stay where the thresholds expect them
GDP_BODY = (
    'src := "econ.gdp";\n'
    "t := fetch(src, range(start_date, end_date));\n"
    "mine := filter(t, country == region);\n"
    "return mine\n"
)
CPI_BODY = GDP_BODY.replace("econ.gdp", "econ.cpi")
CPI_TYPO_BODY = CPI_BODY.replace("country == region", "countri == region")
MACRO_BODY = (
    'src := "econ." + indicator;\n'
    "t := fetch(src, range(start_date, end_date));\n"
    "mine := filter(t, country == region);\n"
    "return mine\n"
)
MACRO_BODY_NO_FILTER = (
    'src := "econ." + indicator;\n'
    "t := fetch(src, range(start_date, end_date));\n"
    "return t\n"
)

MA_GOOD_BODY = (
    "vals := column(table, value_col);\n"
    "ma := moving_avg(vals, window);\n"
    'out := with_col(table, "ma", ma);\n'
    "return out\n"
)
MA_BROKEN_BODY = MA_GOOD_BODY.replace(
    "vals := column(table, value_col);", "vals := column(table, value_col;"
)

STOCK_FETCH_BODY = (
    't := fetch("stock.daily", range(start_date, end_date), frequency);\n'
    "mine := filter(t, ticker == stock_name);\n"
    "return mine\n"
)
PLOT_STOCK_BODY = (
    "merged := concat(tables);\n"
    "c := make_chart(merged, chart_type, key_col(merged), "
    "numeric_cols(merged), title);\n"
    "return c\n"
)

QUERY_DESC = "Fetch rows of the {0} macro indicator series for one region over a time range."


def record(rid, name, params, body, category="data_acquisition",
           tags=("other",), description=None, state="tested"):
    return InterfaceRecord(
        id=rid,
        name=name,
        params=[{"name": p, "semantic_type": t, "description": p} for p, t in params],
        description=description or f"{name} over the catalog",
        category=category,
        task_tags=frozenset(tags),
        body=body,
        state=state,
    )


def gdp_record(state="tested"):
    return record(
        "if-001", "query_gdp_data",
        [("region", "text"), ("start_date", "quarter"), ("end_date", "quarter")],
        GDP_BODY, description=QUERY_DESC.format("gdp"), state=state,
    )


def cpi_record(state="tested"):
    return record(
        "if-002", "query_cpi_data",
        [("region", "text"), ("start_date", "date"), ("end_date", "date")],
        CPI_BODY, description=QUERY_DESC.format("cpi"), state=state,
    )


def sampled_rows(prompt: str) -> list:
    """Parse the CSV block a case prompt embeds, as the tape author would."""
    lines = prompt.splitlines()
    start = next(i for i, ln in enumerate(lines)
                 if ln.startswith("Sampled data from")) + 1
    end = next(i for i, ln in enumerate(lines) if ln.startswith("Reply with JSON"))
    rows = list(csv.reader(io.StringIO("\n".join(lines[start:end]))))
    return [dict(zip(rows[0], r)) for r in rows[1:]]


def macro_invocation(messages):
    row = sampled_rows(messages[-1].text)[0]
    key = row.get("quarter") or row.get("date")
    return json.dumps({
        "request_text": f"What was the reading for {row['country']} at {key}?",
        "bindings": {"region": row["country"], "start_date": key, "end_date": key},
    })


def ma_invocation(messages):
    return json.dumps({
        "request_text": "3-row moving average of the sampled closes",
        "bindings": {"table": "__table__", "value_col": "close", "window": 3},
    })


def routed_gateway(routes, deployer_routes=None):
    """Dispatch on the first line of the last user message."""

    def dispatch(table):
        def fn(messages):
            text = messages[-1].text
            for prefix, handler in table:
                if text.startswith(prefix):
                    return handler(messages)
            raise AssertionError(f"no route for prompt: {text[:90]!r}")
        return fn

    return callable_gateway(
        EngineConfig(),
        explorer_fn=dispatch(routes),
        deployer_fn=dispatch(deployer_routes or []),
    )


def make_forge(tmp_path, catalog, routes, deployer_routes=None, registry=None):
    cfg = EngineConfig(workspace=str(tmp_path))
    gateway = routed_gateway(routes, deployer_routes)
    registry = registry if registry is not None else Registry(tmp_path)
    return Forge(gateway, registry, catalog, cfg)


# -- design -----------------------------------------------------------------


def test_design_reuses_and_drafts(tmp_path, catalog):
    design_reply = {
        "reused": ["query_gdp_data"],
        "new": [{
            "name": "calculate_moving_average",
            "params": [
                {"name": "table", "semantic_type": "table", "description": "input"},
                {"name": "value_col", "semantic_type": "text", "description": "column"},
                {"name": "window", "semantic_type": "number", "description": "span"},
            ],
            "description": "Trailing mean of one numeric column.",
            "category": "index_calculation",
            "task_tags": ["stock", "fund"],
            "body": MA_BROKEN_BODY,
            "oracle": MA_GOOD_BODY,
        }],
        "sketch": "fetch gdp, then smooth",
    }
    forge = make_forge(
        tmp_path, catalog,
        [("Design interfaces", lambda m: json.dumps(design_reply))],
    )
    forge.registry.insert(gdp_record())
    outcome = forge.design_interface(Request("Smooth China's GDP"))
    assert outcome.reused == ["if-001"]
    assert [r.name for r in outcome.drafted] == ["calculate_moving_average"]
    draft = outcome.drafted[0]
    assert draft.state == "draft"
    assert draft.id == "if-002"  # allocated after the max existing id
    assert outcome.oracles == {"calculate_moving_average": MA_GOOD_BODY}
    assert outcome.sketch == "fetch gdp, then smooth"
    assert not outcome.covered_by_reuse


def test_design_rejects_unknown_reuse(tmp_path, catalog):
    forge = make_forge(
        tmp_path, catalog,
        [("Design interfaces",
          lambda m: json.dumps({"reused": ["ghost_interface"], "new": []}))],
    )
    with pytest.raises(ValueError, match="ghost_interface"):
        forge.design_interface(Request("anything"))


def test_design_pure_reuse_creates_nothing(tmp_path, catalog):
    forge = make_forge(
        tmp_path, catalog,
        [("Design interfaces",
          lambda m: json.dumps({"reused": ["query_gdp_data"], "new": []}))],
    )
    forge.registry.insert(gdp_record())
    outcome = forge.design_interface(Request("GDP of China please"))
    assert outcome.covered_by_reuse
    assert outcome.drafted == []


# -- test case generation ---------------------------------------------------


def test_generate_cases_acquisition_expected_is_sample(tmp_path, catalog):
    forge = make_forge(
        tmp_path, catalog,
        [("Write a test invocation for query_gdp_data", macro_invocation)],
    )
    cases = forge.generate_test_cases(gdp_record(state="draft"), K=10, seed=3)
    assert len(cases) == 10
    for i, case in enumerate(cases):
        assert case.id == f"if-001-c{i + 1}"
        assert isinstance(case.expected, DataTable)
        assert case.expected.row_count == 1
        assert case.expected.column_names == ["quarter", "country", "gdp", "gdp_yoy"]
        assert case.provenance["source"] == "econ.gdp"
        assert case.provenance["seed"] == 3000 + i
        assert case.input_bindings["region"] == case.expected.column("country")[0]


def test_generate_cases_deterministic_per_seed(tmp_path, catalog):
    routes = [("Write a test invocation for query_gdp_data", macro_invocation)]
    a = make_forge(tmp_path / "a", catalog, routes).generate_test_cases(
        gdp_record(state="draft"), K=4, seed=3)
    b = make_forge(tmp_path / "b", catalog, routes).generate_test_cases(
        gdp_record(state="draft"), K=4, seed=3)
    c = make_forge(tmp_path / "c", catalog, routes).generate_test_cases(
        gdp_record(state="draft"), K=4, seed=4)
    assert [x.to_json_obj() for x in a] == [x.to_json_obj() for x in b]
    assert [x.to_json_obj() for x in c] != [x.to_json_obj() for x in a]


def test_generate_cases_computed_uses_oracle(tmp_path, catalog):
    forge = make_forge(
        tmp_path, catalog,
        [("Write a test invocation for calculate_moving_average", ma_invocation)],
    )
    draft = record(
        "if-009", "calculate_moving_average",
        [("table", "table"), ("value_col", "text"), ("window", "number")],
        MA_BROKEN_BODY, category="index_calculation", tags=("stock",),
        state="draft",
    )
    cases = forge.generate_test_cases(draft, K=3, seed=7, oracle=MA_GOOD_BODY)
    for case in cases:
        assert isinstance(case.expected, DataTable)
        assert "ma" in case.expected.column_names  # oracle output, not the sample
        assert case.expected.row_count == 8
        assert case.input_bindings["table"] == "__table__"


def test_generate_cases_validates_k_and_source(tmp_path, catalog):
    forge = make_forge(tmp_path, catalog, [])
    with pytest.raises(InvalidConfig):
        forge.generate_test_cases(gdp_record(state="draft"), K=0, seed=1)
    ghost = record("if-031", "query_ghost",
                   [("start_date", "date"), ("end_date", "date")],
                   't := fetch("nope.src", range(start_date, end_date));\nreturn t\n',
                   state="draft")
    with pytest.raises(UnknownSource):
        forge.generate_test_cases(ghost, K=2, seed=1)


def test_generate_cases_requires_full_bindings(tmp_path, catalog):
    partial = lambda m: json.dumps(  # noqa: E731
        {"request_text": "x", "bindings": {"region": "China"}})
    forge = make_forge(tmp_path, catalog, [("Write a test invocation", partial)])
    with pytest.raises(ValueError, match="start_date"):
        forge.generate_test_cases(gdp_record(state="draft"), K=1, seed=1)


# -- certification ----------------------------------------------------------


def certify_setup(tmp_path, catalog, draft, oracle=None, repair_reply=None,
                  invocation=macro_invocation):
    calls = {"repairs": 0}

    def repair(messages):
        calls["repairs"] += 1
        return repair_reply(messages) if callable(repair_reply) else repair_reply

    forge = make_forge(tmp_path, catalog, [
        (f"Write a test invocation for {draft.name}", invocation),
        ("Fix the interface body.", repair),
    ])
    cases = forge.generate_test_cases(draft, K=4, seed=11, oracle=oracle)
    return forge, cases, calls


def test_certify_clean_first_run(tmp_path, catalog):
    forge, cases, calls = certify_setup(
        tmp_path, catalog, gdp_record(state="draft"), repair_reply="unused")
    outcome = forge.certify(gdp_record(state="draft"), cases)
    assert outcome.ok
    assert outcome.repairs == 0
    assert outcome.certified.state == "tested"
    assert outcome.certified.version == 1
    assert outcome.certified.test_case_ids == [c.id for c in cases]
    assert all(c.status == "pass" for c in cases)
    assert calls["repairs"] == 0


def test_certify_repairs_parse_error(tmp_path, catalog):
    draft = record(
        "if-005", "calculate_moving_average",
        [("table", "table"), ("value_col", "text"), ("window", "number")],
        MA_BROKEN_BODY, category="index_calculation", tags=("stock",),
        state="draft",
    )
    forge, cases, calls = certify_setup(
        tmp_path, catalog, draft, oracle=MA_GOOD_BODY,
        repair_reply=f"```\n{MA_GOOD_BODY}```",
        invocation=ma_invocation,
    )
    outcome = forge.certify(draft, cases)
    assert outcome.ok
    assert outcome.repairs == 1
    assert outcome.certified.version == 2
    assert outcome.certified.body.strip() == MA_GOOD_BODY.strip()
    assert calls["repairs"] == 1
    assert draft.body == MA_BROKEN_BODY  # input record never mutated


def test_certify_repairs_runtime_error(tmp_path, catalog):
    draft = cpi_record(state="draft")
    draft.body = CPI_TYPO_BODY
    forge, cases, calls = certify_setup(
        tmp_path, catalog, draft, repair_reply=f"```\n{CPI_BODY}```")
    outcome = forge.certify(draft, cases)
    assert outcome.ok
    assert outcome.repairs == 1
    assert outcome.certified.body.strip() == CPI_BODY.strip()


def test_certify_gives_up_after_budget(tmp_path, catalog):
    draft = cpi_record(state="draft")
    draft.body = CPI_TYPO_BODY
    typos = ["countrey", "kountry", "countrie"]

    def still_broken(messages):
        # a fresh wrong guess each round, so no prompt repeats verbatim
        body = CPI_BODY.replace("country ==", f"{typos.pop(0)} ==")
        return f"```\n{body}```"

    forge, cases, calls = certify_setup(
        tmp_path, catalog, draft, repair_reply=still_broken)
    outcome = forge.certify(draft, cases)
    assert not outcome.ok
    assert calls["repairs"] == 3  # default repair budget
    report = outcome.report
    assert report.repairs_used == 3
    assert len(report.unresolved) == 4  # every case still failing
    assert "countrie" in report.unresolved[0]["diagnostics"]
    assert all(c.status == "fail" for c in cases)


def test_certify_rejects_non_draft(tmp_path, catalog):
    forge = make_forge(tmp_path, catalog, [])
    with pytest.raises(ValueError, match="tested"):
        forge.certify(gdp_record(state="tested"), [])


# -- merging ----------------------------------------------------------------


def seeded_macro_registry(tmp_path, catalog, routes):
    forge = make_forge(tmp_path, catalog, routes, registry=Registry(tmp_path))
    for rec in (gdp_record(state="draft"), cpi_record(state="draft")):
        cases = forge.generate_test_cases(rec, K=4, seed=11)
        outcome = forge.certify(rec, cases)
        assert outcome.ok
        forge.registry.insert(outcome.certified, cases)
    return forge


MERGE_REPLY = {
    "decision": "merge",
    "targets": ["query_gdp_data"],
    "merged": {
        "name": "get_macro_data",
        "params": [
            {"name": "indicator", "semantic_type": "text", "description": "series"},
            {"name": "region", "semantic_type": "text", "description": "country"},
            {"name": "start_date", "semantic_type": "date", "description": "from"},
            {"name": "end_date", "semantic_type": "date", "description": "to"},
        ],
        "description": "Fetch rows of one macro indicator series for one region over a time range.",
        "category": "data_acquisition",
        "task_tags": ["other"],
        "body": MACRO_BODY,
    },
    "call_mappings": {
        "query_cpi_data": {
            "params": {"region": "region", "start_date": "start_date",
                       "end_date": "end_date"},
            "fixed": {"indicator": "cpi"},
        },
        "query_gdp_data": {
            "params": {"region": "region", "start_date": "start_date",
                       "end_date": "end_date"},
            "fixed": {"indicator": "gdp"},
        },
    },
    "rationale": "same fetch-filter shape, source differs by indicator",
}


def test_propose_merge_consults_above_threshold(tmp_path, catalog):
    consulted = {"n": 0}

    def decide(messages):
        consulted["n"] += 1
        assert "query_gdp_data" in messages[-1].text
        return json.dumps(MERGE_REPLY)

    forge = seeded_macro_registry(tmp_path, catalog, [
        ("Write a test invocation", macro_invocation),
        ("Decide whether to merge", decide),
    ])
    new = forge.registry.by_name("query_cpi_data")
    proposal = forge.propose_merge(new)
    assert consulted["n"] == 1
    assert proposal.decision == "merge"
    assert proposal.new_interface_id == new.id
    assert proposal.target_ids == ["if-001"]
    assert proposal.candidate_ids[0] == "if-001"
    assert proposal.similarity_scores[0] >= 0.80
    assert proposal.similarity_scores == sorted(proposal.similarity_scores,
                                                reverse=True)
    assert proposal.target_spec["name"] == "get_macro_data"


def test_propose_merge_skips_dissimilar_without_consulting(tmp_path, catalog):
    def never(messages):
        raise AssertionError("decision prompt must not fire below threshold")

    forge = make_forge(tmp_path, catalog, [("Decide whether to merge", never)])
    forge.registry.insert(gdp_record())
    plot = record(
        "if-004", "plot_line_chart", [("table", "table"), ("title", "text")],
        'c := make_chart(table, "line", key_col(table), numeric_cols(table), title);\n'
        "return c\n",
        category="visualization", tags=("stock", "fund", "corporation", "other"),
        description="Draw a chart of the numeric columns in a table against its time axis, as line type.",
    )
    forge.registry.insert(plot)
    proposal = forge.propose_merge(plot)
    assert proposal.decision == "keep"
    assert "below" in proposal.rationale
    assert proposal.similarity_scores[0] < 0.80


def test_propose_merge_empty_library_keeps(tmp_path, catalog):
    forge = make_forge(tmp_path, catalog, [])
    only = gdp_record()
    forge.registry.insert(only)
    proposal = forge.propose_merge(only)
    assert proposal.decision == "keep"
    assert proposal.candidate_ids == []


def test_propose_merge_honors_keep_decision(tmp_path, catalog):
    forge = seeded_macro_registry(tmp_path, catalog, [
        ("Write a test invocation", macro_invocation),
        ("Decide whether to merge",
         lambda m: json.dumps({"decision": "keep", "rationale": "params differ"})),
    ])
    proposal = forge.propose_merge(forge.registry.by_name("query_cpi_data"))
    assert proposal.decision == "keep"
    assert proposal.rationale == "params differ"


def test_translate_bindings_applies_mapping():
    forge_free = Forge.__new__(Forge)  # translate_bindings needs no state
    original = cpi_record()
    case = type("C", (), {"input_bindings": {
        "region": "China", "start_date": "2019-01-31", "end_date": "2019-01-31",
    }})()
    mapping = MERGE_REPLY["call_mappings"]["query_cpi_data"]
    assert forge_free.translate_bindings(original, case, mapping) == {
        "indicator": "cpi", "region": "China",
        "start_date": "2019-01-31", "end_date": "2019-01-31",
    }
    with pytest.raises(ValueError, match="region"):
        forge_free.translate_bindings(original, case, {"params": {}, "fixed": {}})


def test_translate_bindings_listify_wraps():
    forge_free = Forge.__new__(Forge)
    original = record("if-044", "plot_line_chart",
                      [("table", "table"), ("title", "text")], "return table\n")
    case = type("C", (), {"input_bindings": {"table": "__table__", "title": "t"}})()
    mapping = {"params": {"table": "tables", "title": "title"},
               "fixed": {"chart_type": "line"}, "listify": ["tables"]}
    assert forge_free.translate_bindings(original, case, mapping) == {
        "tables": ["__table__"], "chart_type": "line", "title": "t",
    }


def test_merge_and_validate_swaps_library(tmp_path, catalog):
    forge = seeded_macro_registry(tmp_path, catalog, [
        ("Write a test invocation", macro_invocation),
        ("Decide whether to merge", lambda m: json.dumps(MERGE_REPLY)),
    ])
    registry = forge.registry
    new = registry.by_name("query_cpi_data")
    outcome = forge.merge_and_validate(forge.propose_merge(new))
    assert outcome.ok
    assert outcome.repairs == 0
    merged = registry.by_name("get_macro_data")
    assert merged is not None and merged.state == "tested"
    assert len(merged.test_case_ids) == 8  # union of both originals' suites
    assert registry.get("if-001").state == "merged"
    assert registry.get(new.id).state == "merged"
    assert registry.get("if-001").merged_into == merged.id
    # regression invariant: original cases replay exactly through the merged body
    from copilot.bodylang import parse_and_check
    program = parse_and_check(merged.body)
    for case in registry.cases_for(merged):
        ok, diagnostics = forge.run_case(program, case)
        assert ok, diagnostics
    # retrieval no longer surfaces the originals
    names = {r.name for r in registry.hierarchical_lookup(["other"])}
    assert "get_macro_data" in names
    assert "query_gdp_data" not in names and "query_cpi_data" not in names


def test_merge_abandoned_leaves_originals(tmp_path, catalog):
    bad_reply = dict(MERGE_REPLY)
    bad_reply["merged"] = dict(MERGE_REPLY["merged"], body=MACRO_BODY_NO_FILTER)
    repair_calls = {"n": 0}
    wrong_cols = ["country", "date", "cpi"]

    def stubborn_repair(messages):
        repair_calls["n"] += 1
        body = MACRO_BODY_NO_FILTER.replace(
            "return t",
            f'u := select(t, ["{wrong_cols.pop(0)}"]);\nreturn u',
        )
        return f"```\n{body}```"

    forge = seeded_macro_registry(tmp_path, catalog, [
        ("Write a test invocation", macro_invocation),
        ("Decide whether to merge", lambda m: json.dumps(bad_reply)),
        ("Fix the merged interface body.", stubborn_repair),
    ])
    registry = forge.registry
    outcome = forge.merge_and_validate(
        forge.propose_merge(registry.by_name("query_cpi_data")))
    assert not outcome.ok
    assert repair_calls["n"] == 3  # merge repair budget
    assert outcome.report["repairs_used"] == 3
    assert outcome.report["unresolved"]
    assert registry.by_name("get_macro_data") is None
    assert registry.get("if-001").state == "tested"
    assert registry.get("if-002").state == "tested"


def test_merge_identical_bodies_is_trivial(tmp_path, catalog):
    reply = {
        "decision": "merge",
        "targets": ["query_gdp_data"],
        "merged": dict(MERGE_REPLY["merged"],
                       name="query_gdp_unified", body=GDP_BODY,
                       params=[
                           {"name": "region", "semantic_type": "text",
                            "description": "country"},
                           {"name": "start_date", "semantic_type": "quarter",
                            "description": "from"},
                           {"name": "end_date", "semantic_type": "quarter",
                            "description": "to"},
                       ]),
        "call_mappings": {
            "query_gdp_data": {"params": {"region": "region",
                                          "start_date": "start_date",
                                          "end_date": "end_date"}},
            "query_gdp_data_b": {"params": {"region": "region",
                                            "start_date": "start_date",
                                            "end_date": "end_date"}},
        },
    }
    forge = make_forge(tmp_path, catalog, [
        ("Write a test invocation", macro_invocation),
        ("Decide whether to merge", lambda m: json.dumps(reply)),
    ])
    registry = forge.registry
    for rid, name in (("if-001", "query_gdp_data"), ("if-002", "query_gdp_data_b")):
        rec = record(rid, name,
                     [("region", "text"), ("start_date", "quarter"),
                      ("end_date", "quarter")],
                     GDP_BODY, description=QUERY_DESC.format("gdp"), state="draft")
        cases = forge.generate_test_cases(rec, K=2, seed=5)
        outcome = forge.certify(rec, cases)
        registry.insert(outcome.certified, cases)
    outcome = forge.merge_and_validate(
        forge.propose_merge(registry.by_name("query_gdp_data_b")))
    assert outcome.ok and outcome.repairs == 0


# -- exploration loop -------------------------------------------------------

MAOTAI_TEXT = "Plot the Guizhou Maotai closing price from 2019-01-01 to 2019-03-13"
RADAR_TEXT = "Draw a radar chart of Guizhou Maotai's price statistics"

STOCK_DESIGN = {
    "reused": [],
    "new": [
        {
            "name": "get_stock_prices_data",
            "params": [
                {"name": "stock_name", "semantic_type": "text", "description": "company"},
                {"name": "start_date", "semantic_type": "date", "description": "from"},
                {"name": "end_date", "semantic_type": "date", "description": "to"},
                {"name": "frequency", "semantic_type": "text", "description": "sampling"},
            ],
            "description": "Fetch daily price and volume rows for one stock over a date range.",
            "category": "data_acquisition",
            "task_tags": ["stock"],
            "body": STOCK_FETCH_BODY,
        },
        {
            "name": "plot_stock_data",
            "params": [
                {"name": "tables", "semantic_type": "list", "description": "series tables"},
                {"name": "chart_type", "semantic_type": "text", "description": "line/bar/kline"},
                {"name": "title", "semantic_type": "text", "description": "heading"},
            ],
            "description": "Draw a chart of the numeric columns of the given tables.",
            "category": "visualization",
            "task_tags": ["stock", "fund", "corporation", "other"],
            "body": PLOT_STOCK_BODY,
        },
    ],
    "sketch": "fetch prices, then chart them",
}


def stock_invocation(messages):
    row = sampled_rows(messages[-1].text)[0]
    return json.dumps({
        "request_text": f"Price of {row['ticker']} on {row['date']}",
        "bindings": {"stock_name": row["ticker"], "start_date": row["date"],
                     "end_date": row["date"], "frequency": "daily"},
    })


def plot_invocation(messages):
    return json.dumps({
        "request_text": "Chart the sampled rows",
        "bindings": {"tables": ["__table__"], "chart_type": "line",
                     "title": "Sampled closes"},
    })


def intent_route(messages):
    # the prompt's format list names every chart kind; look only at the request
    request_line = next(ln for ln in messages[-1].text.splitlines()
                        if ln.startswith("Request:"))
    fmt = "radar" if "radar" in request_line else "line"
    return json.dumps({
        "rewritten_text": f"fixture intent for {fmt}",
        "time_range": {"start": "2019-01-01", "end": "2019-03-13"},
        "location": "China",
        "objects": ["Guizhou Maotai"],
        "output_format": fmt,
    })


def tasks_route(messages):
    return json.dumps({"tasks": [{"name": "stock_task",
                                  "instruction": "fetch the prices"}]})


def plan_route(messages):
    if '"output_format": "radar"' in messages[-1].text:
        return json.dumps({
            "step1": {"arg1": ["Guizhou Maotai", "2019-01-01", "2019-03-13", "daily"],
                      "function1": "get_stock_prices_data", "output1": "result1",
                      "description1": "Fetch prices"},
            "step2": {"arg1": ["result1"], "function1": "__raw_code__",
                      "output1": "result2",
                      "description1": "Render a radar chart of price statistics"},
        })
    return json.dumps({
        "step1": {"arg1": ["Guizhou Maotai", "2019-01-01", "2019-03-13", "daily"],
                  "function1": "get_stock_prices_data", "output1": "result1",
                  "description1": "Fetch prices"},
        "step2": {"arg1": [["result1"], "line", "Maotai closing price"],
                  "function1": "plot_stock_data", "output1": "result2",
                  "description1": "Chart the series"},
    })


def design_route_for(table):
    def route(messages):
        request_line = messages[-1].text.splitlines()[1]
        for key, reply in table.items():
            if key in request_line:
                return json.dumps(reply)
        raise AssertionError(f"no design scripted for {request_line!r}")
    return route


DEPLOYER_ROUTES = [
    ("Today is", intent_route),
    ("Intent:", lambda m: tasks_route(m) if "Choose from" in m[-1].text
     else plan_route(m)),
]


def exploration_forge(tmp_path, catalog, design_table, fail_first=None):
    failures = {"armed": set(fail_first or [])}

    def design_dispatch(messages):
        request_line = messages[-1].text.splitlines()[1]
        for key in list(failures["armed"]):
            if key in request_line:
                failures["armed"].discard(key)
                raise TapeMiss("deadbeef00000000")
        return design_route_for(design_table)(messages)

    routes = [
        ("Design interfaces", design_dispatch),
        ("Write a test invocation for get_stock_prices_data", stock_invocation),
        ("Write a test invocation for plot_stock_data", plot_invocation),
    ]
    forge = make_forge(tmp_path, catalog, routes, deployer_routes=DEPLOYER_ROUTES)
    planner = Planner(forge.gateway, forge.registry, forge.config)
    return forge, planner


def test_run_exploration_covers_and_logs(tmp_path, catalog):
    design_table = {
        MAOTAI_TEXT: STOCK_DESIGN,
        RADAR_TEXT: {"reused": [], "new": [],
                     "sketch": "no radar primitive available"},
    }
    forge, planner = exploration_forge(tmp_path, catalog, design_table)
    requests = [Request(MAOTAI_TEXT, provenance="seed"),
                Request(RADAR_TEXT, provenance="seed")]
    result = run_exploration(forge, planner, requests)

    assert result["interfaces"] == 2
    assert result["version"] == 1
    assert result["covered"] == [MAOTAI_TEXT]
    assert result["uncovered"] == [RADAR_TEXT]
    assert result["categories"]["data_acquisition"] == 1
    assert result["categories"]["visualization"] == 1
    assert Path(result["snapshot_path"]).exists()

    registry = forge.registry
    assert registry.by_name("get_stock_prices_data").state == "tested"
    assert registry.by_name("plot_stock_data").state == "tested"
    entries = registry.uncovered_entries("open")
    assert [e.request_text for e in entries] == [RADAR_TEXT]
    # the request is now coverable without any further design work
    assert plan_coverable(planner, MAOTAI_TEXT)
    assert not plan_coverable(planner, RADAR_TEXT)


def test_run_exploration_skips_already_covered(tmp_path, catalog):
    design_calls = {"n": 0}

    def counting_design(messages):
        design_calls["n"] += 1
        return json.dumps(STOCK_DESIGN)

    routes = [
        ("Design interfaces", counting_design),
        ("Write a test invocation for get_stock_prices_data", stock_invocation),
        ("Write a test invocation for plot_stock_data", plot_invocation),
    ]
    forge = make_forge(tmp_path, catalog, routes, deployer_routes=DEPLOYER_ROUTES)
    planner = Planner(forge.gateway, forge.registry, forge.config)
    run_exploration(forge, planner, [Request(MAOTAI_TEXT, provenance="seed")])
    assert design_calls["n"] == 1
    # second pass: the plan validates against the library, design never fires
    run_exploration(forge, planner, [Request(MAOTAI_TEXT, provenance="seed")])
    assert design_calls["n"] == 1


def test_run_exploration_checkpoint_resume(tmp_path, catalog):
    design_table = {MAOTAI_TEXT: STOCK_DESIGN}
    forge, planner = exploration_forge(
        tmp_path, catalog, design_table, fail_first=[MAOTAI_TEXT])
    checkpoint = tmp_path / "exploration-checkpoint.json"
    requests = [Request(RADAR_TEXT, provenance="seed"),
                Request(MAOTAI_TEXT, provenance="seed")]
    # radar design is unscripted in this run: make it coverable-free by
    # scripting an empty design for it
    design_table[RADAR_TEXT] = {"reused": [], "new": [], "sketch": "nothing"}

    with pytest.raises(ExplorationInterrupted) as err:
        run_exploration(forge, planner, requests, checkpoint_path=checkpoint)
    assert err.value.checkpoint_path == str(checkpoint)
    state = json.loads(checkpoint.read_text())
    assert state["done"] == [RADAR_TEXT]

    result = run_exploration(forge, planner, requests, checkpoint_path=checkpoint)
    assert result["covered"] == [MAOTAI_TEXT]
    assert result["uncovered"] == [RADAR_TEXT]
    assert forge.registry.by_name("get_stock_prices_data") is not None
