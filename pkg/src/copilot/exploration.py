"""Request synthesis, backward verification, dedup and classification.

Requests drive interface design: seeds plus source parsing files are
expanded into candidate analysis requests, each candidate is mapped back
to concrete sources and columns (hallucinated needs get rejected with
the first unresolvable reference), near-duplicates are dropped by
embedding cosine, and survivors are labeled with task type and
complexity for stratified splits.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .catalog import TASK_TYPES
from .errors import QuotaInfeasible
from .llm import ChatMessage
from .llm.embedding import cosine
from .planner import _json_payload

PROVENANCES = ("seed", "synthesized")
COMPLEXITIES = ("single", "multiple", "complex_relations")


@dataclass
class Request:
    text: str
    provenance: str = "synthesized"
    topic_keyword: str = ""
    task_type: str | None = None  # set by classify
    complexity: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("request text must be non-empty")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.task_type is not None and self.task_type not in TASK_TYPES:
            raise ValueError(f"unknown task type {self.task_type!r}")
        if self.complexity is not None and self.complexity not in COMPLEXITIES:
            raise ValueError(f"unknown complexity {self.complexity!r}")

    def to_json_obj(self) -> dict:
        return {
            "text": self.text,
            "provenance": self.provenance,
            "topic_keyword": self.topic_keyword,
            "task_type": self.task_type,
            "complexity": self.complexity,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Request":
        return cls(
            text=obj["text"],
            provenance=obj.get("provenance", "synthesized"),
            topic_keyword=obj.get("topic_keyword", ""),
            task_type=obj.get("task_type"),
            complexity=obj.get("complexity"),
        )


@dataclass
class VerificationReport:
    request: Request
    resolved_sources: list = field(default_factory=list)
    key_fields: list = field(default_factory=list)
    verdict: str = "reject"
    reason: str = ""

    def to_json_obj(self) -> dict:
        return {
            "request": self.request.to_json_obj(),
            "resolved_sources": list(self.resolved_sources),
            "key_fields": list(self.key_fields),
            "verdict": self.verdict,
            "reason": self.reason,
        }


def apportion(quota: dict, n: int) -> dict:
    """Split n among topics proportionally to quota weights.

    Largest-remainder rounding; ties broken by topic insertion order.
    """
    if n < 1:
        raise QuotaInfeasible("cannot synthesize fewer than one request")
    if not quota:
        raise QuotaInfeasible("keyword quota is empty")
    if any(w <= 0 for w in quota.values()):
        raise QuotaInfeasible("quota weights must be positive")
    total = sum(quota.values())
    if total > n:
        raise QuotaInfeasible(f"quota weights sum to {total}, more than n={n}")
    exact = {topic: n * w / total for topic, w in quota.items()}
    counts = {topic: int(exact[topic]) for topic in quota}
    leftover = n - sum(counts.values())
    by_remainder = sorted(
        quota, key=lambda t: exact[t] - counts[t], reverse=True
    )
    for topic in by_remainder[:leftover]:
        counts[topic] += 1
    return counts


def synthesize_requests(gateway, seeds: list, parsing_files: list, n: int,
                        keyword_quota: dict) -> list:
    """Ask the explorer tier for n new requests, apportioned across topics."""
    counts = apportion(keyword_quota, n)
    seed_lines = "\n".join(f"- {s.text}" for s in seeds) or "- (none)"
    source_lines = "\n".join(pf.to_prompt_text() for pf in parsing_files)
    out: list = []
    for topic, count in counts.items():
        if count == 0:
            continue
        prompt = (
            f"Synthesize {count} financial analysis requests about {topic}.\n"
            f"Example requests:\n{seed_lines}\n"
            f"Available data:\n{source_lines}\n"
            'Reply with a JSON list of request strings, e.g. ["..."]. '
            "Vary entities, time spans and asked-for outputs; every request "
            "must be answerable from the data above."
        )
        reply = gateway.complete("explorer", [ChatMessage("user", prompt)]).text
        texts = _json_payload(reply)
        if not isinstance(texts, list) or len(texts) != count:
            raise ValueError(
                f"expected {count} requests for topic {topic!r}, got {reply[:120]!r}"
            )
        out.extend(
            Request(text=str(t), provenance="synthesized", topic_keyword=topic)
            for t in texts
        )
    return out


def backward_verify(gateway, request: Request, catalog) -> VerificationReport:
    """Map the request back onto registered sources and columns.

    The extraction comes from the model; acceptance is checked here, so a
    hallucinated source or column can never be accepted.
    """
    inventory = "\n".join(
        f"- {sid}: columns " + ", ".join(c.name for c in catalog.source(sid).schema)
        for sid in catalog.source_ids()
    )
    prompt = (
        "Map the request to data sources.\n"
        f"Request: {request.text}\n"
        f"Registered sources:\n{inventory}\n"
        'Reply with JSON {"sources": [{"id": "...", "columns": ["..."]}], '
        '"entities": ["..."]}. If some data the request needs is not listed, '
        'reply {"unresolved": "<what is missing>"} instead.'
    )
    reply = gateway.complete("explorer", [ChatMessage("user", prompt)]).text
    try:
        extraction = _json_payload(reply)
    except (json.JSONDecodeError, ValueError):
        return VerificationReport(request, verdict="reject",
                                  reason=f"unparseable extraction: {reply[:120]}")
    if "unresolved" in extraction:
        return VerificationReport(request, verdict="reject",
                                  reason=f"no source for {extraction['unresolved']}")

    registered = set(catalog.source_ids())
    resolved: list = []
    fields: list = list(extraction.get("entities", []))
    for need in extraction.get("sources", []):
        sid = need.get("id", "")
        if sid not in registered:
            return VerificationReport(request, verdict="reject",
                                      reason=f"unknown source {sid!r}")
        have = {c.name for c in catalog.source(sid).schema}
        for col in need.get("columns", []):
            if col not in have:
                return VerificationReport(
                    request, verdict="reject",
                    reason=f"source {sid} has no column {col!r}",
                )
            fields.append(col)
        resolved.append(sid)
    if not resolved:
        return VerificationReport(request, verdict="reject",
                                  reason="extraction names no sources")
    return VerificationReport(request, resolved_sources=resolved,
                              key_fields=fields, verdict="accept")


def deduplicate(requests: list, threshold: float) -> list:
    """Greedy order-preserving filter on embedding cosine similarity."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    from .llm import embedding

    kept: list = []
    kept_vecs: list = []
    for request in requests:
        vec = embedding.embed(request.text)
        if any(cosine(vec, other) >= threshold for other in kept_vecs):
            continue
        kept.append(request)
        kept_vecs.append(vec)
    return kept


def classify(gateway, request: Request) -> tuple:
    """Label the request with (task_type, complexity)."""
    prompt = (
        "Classify the request.\n"
        f"Request: {request.text}\n"
        f"task_type is one of {list(TASK_TYPES)}; corporation covers "
        "company fundamentals, other covers macro indicators and news.\n"
        f"complexity is one of {list(COMPLEXITIES)}: single entity, several "
        "entities, or several entities with loops or interlocking conditions.\n"
        'Reply with JSON {"task_type": "...", "complexity": "..."}.'
    )
    reply = gateway.complete("explorer", [ChatMessage("user", prompt)]).text
    labels = _json_payload(reply)
    task_type = labels.get("task_type")
    complexity = labels.get("complexity")
    if task_type not in TASK_TYPES:
        raise ValueError(f"bad task type {task_type!r} for {request.text[:60]!r}")
    if complexity not in COMPLEXITIES:
        raise ValueError(f"bad complexity {complexity!r} for {request.text[:60]!r}")
    return task_type, complexity


def stratified_split(requests: list, test_fraction: float, seed: int) -> tuple:
    """Deterministic (design, test) split, sampled per (task, complexity) stratum."""
    if not 0 <= test_fraction < 1:
        raise ValueError("test_fraction must be in [0, 1)")
    strata: dict = {}
    for request in requests:
        strata.setdefault((request.task_type, request.complexity), []).append(request)
    rng = random.Random(seed)
    test: list = []
    for key in sorted(strata, key=str):
        members = strata[key]
        take = round(len(members) * test_fraction)
        test.extend(rng.sample(members, take))
    test_ids = {id(r) for r in test}
    design = [r for r in requests if id(r) not in test_ids]
    test_in_order = [r for r in requests if id(r) in test_ids]
    return design, test_in_order


def write_requests(path: str | Path, requests: list) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = "".join(
        json.dumps(r.to_json_obj(), ensure_ascii=False) + "\n" for r in requests
    )
    out.write_text(lines, encoding="utf-8")
    return out


def read_requests(path: str | Path) -> list:
    text = Path(path).read_text(encoding="utf-8")
    return [
        Request.from_json_obj(json.loads(line))
        for line in text.splitlines()
        if line.strip()
    ]
