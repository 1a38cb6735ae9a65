"""Request synthesis, backward verification, dedup, classification, splits."""

import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from copilot.config import EngineConfig
from copilot.errors import QuotaInfeasible
from copilot.exploration import (
    Request,
    apportion,
    backward_verify,
    classify,
    deduplicate,
    read_requests,
    stratified_split,
    synthesize_requests,
    write_requests,
)
from copilot.llm.embedding import cosine, embed
from copilot.llm.gateway import callable_gateway


def gw(explorer_fn):
    return callable_gateway(EngineConfig(), explorer_fn)


def seeds():
    return [
        Request("Show China's GDP trend for the past decade", provenance="seed"),
        Request("Plot the Guizhou Maotai price this year", provenance="seed"),
    ]


# -- quota apportionment ----------------------------------------------------


def test_apportion_matches_ratio_example():
    assert apportion({"stock": 2, "fund": 1}, 9) == {"stock": 6, "fund": 3}


def test_apportion_distributes_remainder_by_largest_fraction():
    assert apportion({"a": 1, "b": 1, "c": 1}, 7) == {"a": 3, "b": 2, "c": 2}


@given(
    weights=st.lists(st.integers(min_value=1, max_value=9), min_size=1, max_size=6),
    extra=st.integers(min_value=0, max_value=40),
)
@settings(max_examples=60, deadline=None)
def test_apportion_conserves_total(weights, extra):
    quota = {f"t{i}": w for i, w in enumerate(weights)}
    n = sum(weights) + extra
    counts = apportion(quota, n)
    assert sum(counts.values()) == n
    assert set(counts) == set(quota)


@pytest.mark.parametrize(
    "quota, n",
    [({"a": 1}, 0), ({}, 5), ({"a": 3, "b": 3}, 5), ({"a": 0}, 3)],
)
def test_apportion_rejects_infeasible_quota(quota, n):
    with pytest.raises(QuotaInfeasible):
        apportion(quota, n)


# -- synthesis --------------------------------------------------------------


def scripted_synth(messages):
    match = re.match(r"Synthesize (\d+) financial analysis requests about (\w+)",
                     messages[-1].text)
    count, topic = int(match.group(1)), match.group(2)
    return json.dumps([f"{topic} request {i + 1} about close prices"
                       for i in range(count)])


def test_synthesize_tags_topics_and_conserves_counts(catalog):
    pf = [catalog.generate_parsing_file(sid) for sid in catalog.source_ids()]
    out = synthesize_requests(gw(scripted_synth), seeds(), pf, 9,
                              {"stock": 2, "fund": 1})
    assert len(out) == 9
    by_topic = {}
    for request in out:
        by_topic.setdefault(request.topic_keyword, []).append(request)
        assert request.provenance == "synthesized"
    assert {t: len(v) for t, v in by_topic.items()} == {"stock": 6, "fund": 3}


def test_synthesize_rejects_short_reply(catalog):
    out_of_quota = lambda messages: json.dumps(["only one"])  # noqa: E731
    with pytest.raises(ValueError, match="expected 3"):
        synthesize_requests(gw(out_of_quota), seeds(), [], 3, {"stock": 1})


# -- backward verification --------------------------------------------------


def extraction(reply_obj):
    return gw(lambda messages: json.dumps(reply_obj))


def test_verify_accepts_resolvable_request(catalog):
    request = Request("I want to see China's GDP trend over the past ten years")
    report = backward_verify(
        extraction({"sources": [{"id": "econ.gdp", "columns": ["gdp", "country"]}],
                    "entities": ["China"]}),
        request, catalog,
    )
    assert report.verdict == "accept"
    assert report.resolved_sources == ["econ.gdp"]
    assert "China" in report.key_fields and "gdp" in report.key_fields
    # soundness is checkable without the model
    assert set(report.resolved_sources) <= set(catalog.source_ids())


def test_verify_rejects_missing_source(catalog):
    report = backward_verify(
        extraction({"unresolved": "bitcoin prices"}),
        Request("Plot Bitcoin price this year"), catalog,
    )
    assert report.verdict == "reject"
    assert "bitcoin prices" in report.reason


def test_verify_rejects_hallucinated_source(catalog):
    report = backward_verify(
        extraction({"sources": [{"id": "crypto.btc", "columns": ["close"]}]}),
        Request("Plot Bitcoin price this year"), catalog,
    )
    assert report.verdict == "reject"
    assert "crypto.btc" in report.reason


def test_verify_rejects_nonexistent_column(catalog):
    report = backward_verify(
        extraction({"sources": [{"id": "econ.gdp", "columns": ["gdp_per_capita"]}]}),
        Request("GDP per capita of China"), catalog,
    )
    assert report.verdict == "reject"
    assert "gdp_per_capita" in report.reason


def test_verify_rejects_empty_extraction(catalog):
    report = backward_verify(
        extraction({"sources": [], "entities": []}),
        Request("Tell me something"), catalog,
    )
    assert report.verdict == "reject"


def test_verify_rejects_unparseable_reply(catalog):
    report = backward_verify(
        gw(lambda m: "sure, the sources are gdp and cpi"),
        Request("GDP of China"), catalog,
    )
    assert report.verdict == "reject"
    assert "unparseable" in report.reason


# -- deduplication ----------------------------------------------------------

NEAR_PAIR = (
    "Plot the closing price of Guizhou Maotai for the past year",
    "Plot the closing price trend of Guizhou Maotai for the past year",
)


def test_dedup_drops_identical_texts():
    out = deduplicate([Request("same text"), Request("same text")], 0.92)
    assert len(out) == 1


def test_dedup_threshold_straddles_frozen_pair():
    similarity = cosine(embed(NEAR_PAIR[0]), embed(NEAR_PAIR[1]))
    assert 0.92 <= similarity < 0.97  # pair chosen to sit between the thresholds
    requests = [Request(NEAR_PAIR[0]), Request(NEAR_PAIR[1])]
    assert [r.text for r in deduplicate(requests, 0.92)] == [NEAR_PAIR[0]]
    assert len(deduplicate(requests, 0.97)) == 2


def test_dedup_keeps_first_occurrence_and_order():
    requests = [
        Request("Show fund nav history for Harvest CSI 300"),
        Request(NEAR_PAIR[0]),
        Request("Compare ROE of banks in 2022"),
        Request(NEAR_PAIR[1]),
    ]
    kept = deduplicate(requests, 0.92)
    assert [r.text for r in kept] == [requests[0].text, NEAR_PAIR[0], requests[2].text]


def test_dedup_validates_threshold():
    with pytest.raises(ValueError):
        deduplicate([Request("x y z")], 0.0)
    with pytest.raises(ValueError):
        deduplicate([Request("x y z")], 1.5)


@given(st.lists(
    st.text(alphabet="abcdefg ", min_size=3, max_size=24).filter(str.strip),
    min_size=0, max_size=12,
))
@settings(max_examples=40, deadline=None)
def test_dedup_idempotent(texts):
    requests = [Request(t) for t in texts]
    once = deduplicate(requests, 0.92)
    again = deduplicate(list(once), 0.92)
    assert [r.text for r in again] == [r.text for r in once]


# -- classification ---------------------------------------------------------


def test_classify_returns_labels():
    labels = gw(lambda m: json.dumps({"task_type": "stock",
                                      "complexity": "multiple"}))
    request = Request("Compare the return of CSI 300, GEM and CSI 1000 this year")
    assert classify(labels, request) == ("stock", "multiple")


def test_classify_rejects_unknown_labels():
    bad_task = gw(lambda m: json.dumps({"task_type": "crypto",
                                        "complexity": "single"}))
    with pytest.raises(ValueError, match="task type"):
        classify(bad_task, Request("whatever"))
    bad_complex = gw(lambda m: json.dumps({"task_type": "stock",
                                           "complexity": "huge"}))
    with pytest.raises(ValueError, match="complexity"):
        classify(bad_complex, Request("whatever"))


# -- request model and persistence ------------------------------------------


def test_request_validation():
    with pytest.raises(ValueError):
        Request("  ")
    with pytest.raises(ValueError):
        Request("x", provenance="oracle")
    with pytest.raises(ValueError):
        Request("x", task_type="crypto")
    with pytest.raises(ValueError):
        Request("x", complexity="enormous")


def test_requests_round_trip_jsonl(tmp_path):
    requests = [
        Request("GDP of China", provenance="seed", task_type="other",
                complexity="single"),
        Request("Top 10 stocks by gain", topic_keyword="stock",
                task_type="stock", complexity="complex_relations"),
    ]
    path = write_requests(tmp_path / "corpus" / "design.jsonl", requests)
    loaded = read_requests(path)
    assert [r.to_json_obj() for r in loaded] == [r.to_json_obj() for r in requests]


def test_stratified_split_is_deterministic_and_proportional():
    requests = []
    for task, count in (("stock", 10), ("fund", 5), ("other", 5)):
        for i in range(count):
            requests.append(Request(f"{task} request {i}", task_type=task,
                                    complexity="single"))
    design, test = stratified_split(requests, 0.2, seed=7)
    design2, test2 = stratified_split(requests, 0.2, seed=7)
    assert [r.text for r in test] == [r.text for r in test2]
    assert [r.text for r in design] == [r.text for r in design2]
    assert len(test) == 4  # 2 + 1 + 1
    assert len(design) + len(test) == len(requests)
    assert {r.text for r in design}.isdisjoint({r.text for r in test})
    by_task = {}
    for r in test:
        by_task[r.task_type] = by_task.get(r.task_type, 0) + 1
    assert by_task == {"stock": 2, "fund": 1, "other": 1}
