"""Record the scripted provider tapes and the fixtures derived from them.

Drives the real engine entry points against the deterministic rulebook
and captures every prompt/reply pair onto three tapes:

  tests/tapes/explore.json  corpus synthesis, both exploration runs, the
                            post-exploration coverability sweep, and the
                            second exploration that covers the radar ask
  tests/tapes/serve.json    three request runs against the v1 library,
                            one of them through the hybrid code path
  tests/tapes/bench.json    the 50-request closing-price benchmark in
                            both execution modes

Also writes fixtures/corpus/requests.jsonl, fixtures/library/snapshot-v1.json,
fixtures/bench/cases.jsonl and the six console API fixtures. Asserts the
calibrated outcomes (interface counts, merges, uncovered set, token
ratio) so a drifting rulebook fails here rather than in the test suite.

Run from the repository root: python3 scripts/record_tapes.py
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "scripts"))

import rulebook  # noqa: E402

from copilot.catalog import FetchQuery  # noqa: E402
from copilot.config import EngineConfig, TierConfig  # noqa: E402
from copilot.exploration import (  # noqa: E402
    Request,
    backward_verify,
    classify,
    deduplicate,
    synthesize_requests,
    write_requests,
)
from copilot.forge import plan_coverable  # noqa: E402
from copilot.llm.gateway import Gateway  # noqa: E402
from copilot.llm.providers import CallableProvider, RecordingProvider  # noqa: E402
from copilot.service.engine import (  # noqa: E402
    Engine,
    RunOptions,
    install_snapshot,
    run_eval,
    run_explore_sync,
    run_request_sync,
)
from copilot.sources import default_catalog  # noqa: E402

TAPES = ROOT / "tests" / "tapes"
CONSOLE_DIR = ROOT / "fixtures" / "console"
CORPUS_PATH = ROOT / "fixtures" / "corpus" / "requests.jsonl"
BENCH_CASES = ROOT / "fixtures" / "bench" / "cases.jsonl"
SNAPSHOT_V1 = ROOT / "fixtures" / "library" / "snapshot-v1.json"

# the serve phase answers these three and captures their API views
CONSOLE_RUNS = [
    ("maotai", "Plot the closing price of Guizhou Maotai from 2018-01-23 to 2019-03-13"),
    ("indexes", rulebook.SYNTH_TEXTS["stock"][1]),
    ("radar", rulebook.RADAR_TEXT),
]

NO_MERGE_UNCOVERED = {
    rulebook.SYNTH_TEXTS["stock"][1],   # three indexes on one chart
    rulebook.SYNTH_TEXTS["stock"][6],   # two stocks on one chart
    rulebook.SYNTH_TEXTS["fund"][1],    # two funds on one chart
    rulebook.SYNTH_TEXTS["other"][1],   # two countries on one chart
    # the bar chart drafted for the stock corpus carries only the stock
    # task tag, so economic-task retrieval never sees it
    rulebook.SYNTH_TEXTS["other"][2],
}


def combined_reply(messages) -> str:
    """Serve both tiers from one provider; prompt prefixes are disjoint."""
    try:
        return rulebook.explorer_reply(messages)
    except rulebook.RuleMiss as exc:
        if not str(exc).startswith("explorer prompt not scripted"):
            raise
    return rulebook.deployer_reply(messages)


def recording_gateway(workspace: Path, tape: Path) -> tuple:
    cfg = engine_config(workspace)
    recorder = RecordingProvider(CallableProvider(combined_reply), tape)
    gateway = Gateway(cfg, providers={"explorer": recorder, "deployer": recorder})
    return cfg, gateway, recorder


def engine_config(workspace: Path) -> EngineConfig:
    return EngineConfig(
        workspace=str(workspace),
        explorer=TierConfig(provider="scripted", tape="unused", cache=True),
        deployer=TierConfig(provider="scripted", tape="unused"),
    )


def check(label: str, actual, expected) -> None:
    if actual != expected:
        raise SystemExit(f"recorder drift at {label}: {actual!r} != {expected!r}")


def record_corpus(gateway) -> list:
    """Phase 1: synthesize, verify, deduplicate and classify the corpus."""
    catalog = default_catalog(ROOT)
    parsing_files = [catalog.generate_parsing_file(sid) for sid in catalog.source_ids()]
    seeds = [Request(text=t, provenance="seed") for t in rulebook.SEED_TEXTS]

    synthesized = synthesize_requests(
        gateway, seeds, parsing_files, n=sum(rulebook.SYNTH_QUOTA.values()),
        keyword_quota=rulebook.SYNTH_QUOTA,
    )
    check("synthesized count", len(synthesized), 25)

    candidates = seeds + synthesized
    for request in candidates:
        report = backward_verify(gateway, request, catalog)
        check(f"verify {request.text[:40]!r}", report.verdict, "accept")

    kept = deduplicate(candidates, threshold=0.92)
    check("survivors", [r.text for r in kept], rulebook.CORPUS_TEXTS)

    final = []
    for request in kept:
        task_type, complexity = classify(gateway, request)
        spec = rulebook.BY_TEXT[request.text]
        check(f"classify {request.text[:40]!r}",
              (task_type, complexity), (spec["task_type"], spec["complexity"]))
        final.append(Request(
            text=request.text, provenance=request.provenance,
            topic_keyword=request.topic_keyword,
            task_type=task_type, complexity=complexity,
        ))

    CORPUS_PATH.parent.mkdir(parents=True, exist_ok=True)
    write_requests(CORPUS_PATH, final)
    print(f"corpus: {len(final)} requests -> {CORPUS_PATH.relative_to(ROOT)}")
    return final


def record_explore_merged(gateway, cfg) -> None:
    """Phase 2: exploration from an empty library, merges on."""
    engine = Engine(cfg, data_dir=ROOT, gateway=gateway)
    result = run_explore_sync(engine, merge=True, corpus_path=CORPUS_PATH)

    check("merged version", result["version"], 1)
    check("merged active", result["interfaces"], 13)
    check("merged covered", len(result["covered"]), 25)
    check("merged uncovered", result["uncovered"], [])
    check("merge pairs", sorted(m["merged"] for m in result["merges"]),
          ["get_macro_data", "plot_stock_data"])

    SNAPSHOT_V1.parent.mkdir(parents=True, exist_ok=True)
    shutil.copy(result["snapshot_path"], SNAPSHOT_V1)
    print(f"library v1: 13 active -> {SNAPSHOT_V1.relative_to(ROOT)}")

    # sweep: every corpus request must stay plan-coverable against v1; the
    # replay fingerprints for that check are recorded here
    for text in rulebook.CORPUS_TEXTS:
        if not plan_coverable(engine.planner, text):
            raise SystemExit(f"not coverable at v1: {text!r}")
    print("coverability sweep: 25/25 at v1")


def record_explore_no_merge(gateway, cfg) -> None:
    """Phase 3: same corpus with merging disabled, separate workspace."""
    engine = Engine(cfg, data_dir=ROOT, gateway=gateway)
    result = run_explore_sync(engine, merge=False, corpus_path=CORPUS_PATH)

    check("no-merge active", result["interfaces"], 16)
    check("no-merge merges", result["merges"], [])
    check("no-merge uncovered", set(result["uncovered"]), NO_MERGE_UNCOVERED)
    print("no-merge run: 16 active, 5 uncovered")


def record_serve(ws_a: Path, tape: Path) -> None:
    """Phase 4: three asks against v1; capture their API views as fixtures."""
    from fastapi.testclient import TestClient

    from copilot.service.app import create_app

    cfg, gateway, recorder = recording_gateway(ws_a, tape)
    engine = Engine(cfg, data_dir=ROOT, gateway=gateway)
    check("serve bootstraps v1", len(engine.registry.active_records()), 13)
    client = TestClient(create_app(engine))
    CONSOLE_DIR.mkdir(parents=True, exist_ok=True)

    for name, text in CONSOLE_RUNS:
        resp = client.post("/api/requests", json={"text": text})
        check(f"{name} accepted", resp.status_code, 202)
        run_id = resp.json()["run_id"]
        deadline = time.time() + 60
        while True:
            record = client.get(f"/api/runs/{run_id}").json()
            if record["status"] in ("done", "failed"):
                break
            if time.time() > deadline:
                raise SystemExit(f"{name} run never finished")
            time.sleep(0.05)
        check(f"{name} status", record["status"], "done")

        events = []
        with client.stream("GET", f"/api/runs/{run_id}/events") as stream:
            for line in stream.iter_lines():
                if line.startswith("data: "):
                    payload = json.loads(line[len("data: "):])
                    if "sequence" in payload:
                        events.append(payload)
        check(f"{name} event sequence", [e["sequence"] for e in events],
              list(range(1, len(events) + 1)))

        (CONSOLE_DIR / f"{name}-run.json").write_text(
            json.dumps(record, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
        (CONSOLE_DIR / f"{name}-events.json").write_text(
            json.dumps(events, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
        charts = len(record["bundle"]["charts"])
        print(f"serve {name}: {record['status']}, {len(events)} events, {charts} chart(s)")

    interfaces = client.get("/api/interfaces").json()
    (CONSOLE_DIR / "interfaces.json").write_text(
        json.dumps(interfaces, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    open_entries = engine.registry.uncovered_entries("open")
    check("radar logged uncovered", [e.request_text for e in open_entries],
          [rulebook.RADAR_TEXT])
    recorder.flush()


def record_explore_radar(gateway, cfg) -> None:
    """Phase 5: second exploration covers the radar ask and resolves it."""
    engine = Engine(cfg, data_dir=ROOT, gateway=gateway)
    check("radar entry open", len(engine.registry.uncovered_entries("open")), 1)
    result = run_explore_sync(engine, merge=True, corpus_path=CORPUS_PATH)

    check("second version", result["version"], 2)
    check("second active", result["interfaces"], 14)
    check("second uncovered", result["uncovered"], [])
    check("resolved", [r["request"] for r in result["resolved"]],
          [rulebook.RADAR_TEXT])
    check("radar entry closed", engine.registry.uncovered_entries("open"), [])
    if not plan_coverable(engine.planner, rulebook.RADAR_TEXT):
        raise SystemExit("radar request still not coverable at v2")
    print("explore #2: radar covered, entry resolved, library v2")


def build_bench_cases() -> None:
    """Labeled tables straight off the catalog, one per bench request."""
    catalog = default_catalog(ROOT)
    lines = []
    for text in rulebook.bench_requests():
        match = rulebook.BENCH_RE.match(text)
        table = catalog.fetch("stock.daily", FetchQuery(
            time_range=(match.group("start"), match.group("end")),
            filters={"ticker": match.group("ticker")},
            columns=["date", "close"],
        ))
        if table.row_count == 0:
            raise SystemExit(f"no labeled rows for {text!r}")
        lines.append(json.dumps({
            "request": text,
            "labeled_table": table.to_csv_text(),
            "expected_format": "line",
            "task_type": "stock",
            "complexity": "single",
        }, ensure_ascii=False))
    BENCH_CASES.parent.mkdir(parents=True, exist_ok=True)
    BENCH_CASES.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"bench cases: {len(lines)} -> {BENCH_CASES.relative_to(ROOT)}")


def record_bench(ws_c: Path, tape: Path) -> None:
    """Phase 6: both benchmark modes against a v1 workspace."""
    cfg, gateway, recorder = recording_gateway(ws_c, tape)
    engine = Engine(cfg, data_dir=ROOT, gateway=gateway)
    install_snapshot(engine.registry, SNAPSHOT_V1)
    check("bench bootstraps v1", len(engine.registry.active_records()), 13)

    _, workflow = run_eval(engine, BENCH_CASES, "interface_workflow")
    _, direct = run_eval(engine, BENCH_CASES, "direct_code")
    recorder.flush()

    check("workflow accuracy", workflow.accuracy, 1.0)
    check("direct accuracy", direct.accuracy, 1.0)
    w_tokens = workflow.token_totals["output_tokens"]
    d_tokens = direct.token_totals["output_tokens"]
    ratio = w_tokens / d_tokens
    print(f"bench tokens: workflow {w_tokens} vs direct {d_tokens} "
          f"(ratio {ratio:.3f})")
    if ratio > 0.7:
        raise SystemExit(f"token ratio {ratio:.3f} exceeds 0.7")


def main() -> None:
    TAPES.mkdir(parents=True, exist_ok=True)
    for stale in (TAPES / "explore.json", TAPES / "serve.json", TAPES / "bench.json"):
        stale.unlink(missing_ok=True)

    scratch = Path(tempfile.mkdtemp(prefix="copilot-record-"))
    ws_a = scratch / "ws-merged"
    ws_b = scratch / "ws-no-merge"
    ws_c = scratch / "ws-bench"

    explore_tape = TAPES / "explore.json"
    cfg_a, gw_explore, rec_explore = recording_gateway(ws_a, explore_tape)
    record_corpus(gw_explore)
    rec_explore.flush()  # keep partial tapes when a later phase drifts
    record_explore_merged(gw_explore, cfg_a)
    rec_explore.flush()
    cfg_b = engine_config(ws_b)
    record_explore_no_merge(gw_explore, cfg_b)
    rec_explore.flush()

    record_serve(ws_a, TAPES / "serve.json")

    # reopen the explore tape so phase 5 appends to it
    cfg_a2, gw_explore2, rec_explore2 = recording_gateway(ws_a, explore_tape)
    record_explore_radar(gw_explore2, cfg_a2)
    rec_explore2.flush()

    build_bench_cases()
    record_bench(ws_c, TAPES / "bench.json")

    for tape in sorted(TAPES.glob("*.json")):
        entries = len(json.loads(tape.read_text(encoding="utf-8")))
        print(f"tape {tape.name}: {entries} entries")
    shutil.rmtree(scratch, ignore_errors=True)
    print("recording complete")


if __name__ == "__main__":
    main()
