"""Gateway tiers, scripted tapes, retry contract, embeddings, token counts."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from copilot.config import EngineConfig
from copilot.errors import ContextOverflow, EmptyText, ProviderUnavailable, TapeMiss
from copilot.llm import ChatMessage, Gateway, count_tokens, fingerprint
from copilot.llm.embedding import cosine, embed
from copilot.llm.gateway import callable_gateway
from copilot.llm.providers import HttpProvider, ScriptedProvider

MSGS = [ChatMessage("system", "You are terse."), ChatMessage("user", "say hi")]


# -- fingerprint -----------------------------------------------------------


def test_fingerprint_collapses_whitespace():
    a = fingerprint("explorer", [ChatMessage("user", "plot  GDP\n trend")])
    b = fingerprint("explorer", [ChatMessage("user", "plot GDP trend ")])
    assert a == b


def test_fingerprint_distinguishes_tier_and_text():
    base = fingerprint("explorer", MSGS)
    assert fingerprint("deployer", MSGS) != base
    assert fingerprint("explorer", [MSGS[0], ChatMessage("user", "say bye")]) != base


# -- scripted provider -----------------------------------------------------


def make_gateway(tmp_path, entries, **tier_overrides):
    tape = tmp_path / "tape.json"
    tape.write_text(json.dumps(entries), encoding="utf-8")
    cfg = EngineConfig(workspace=str(tmp_path))
    for k, v in tier_overrides.items():
        setattr(cfg.explorer, k, v)
    return Gateway(cfg, providers={"explorer": ScriptedProvider(tape), "deployer": ScriptedProvider(tape)})


def test_tape_hit_returns_verbatim(tmp_path):
    fp = fingerprint("explorer", MSGS)
    gw = make_gateway(tmp_path, {fp: "hi there"})
    result = gw.complete("explorer", MSGS)
    assert result.text == "hi there"
    assert result.fingerprint == fp
    assert result.completion_tokens == count_tokens("hi there")


def test_tape_miss_names_fingerprint(tmp_path):
    gw = make_gateway(tmp_path, {})
    fp = fingerprint("explorer", MSGS)
    with pytest.raises(TapeMiss) as err:
        gw.complete("explorer", MSGS)
    assert fp in str(err.value)


def test_scripted_replay_is_bit_reproducible(tmp_path):
    fp = fingerprint("explorer", MSGS)
    gw = make_gateway(tmp_path, {fp: "stable"})
    first = [gw.complete("explorer", MSGS).text for _ in range(3)]
    assert first == ["stable", "stable", "stable"]


def test_explorer_cache_on_deployer_off(tmp_path):
    fp_e = fingerprint("explorer", MSGS)
    fp_d = fingerprint("deployer", MSGS)
    tape = tmp_path / "tape.json"
    tape.write_text(json.dumps({fp_e: "x", fp_d: "y"}), encoding="utf-8")
    cfg = EngineConfig(workspace=str(tmp_path))
    assert cfg.explorer.cache is True and cfg.deployer.cache is False
    gw = Gateway(cfg, providers={"explorer": ScriptedProvider(tape), "deployer": ScriptedProvider(tape)})
    assert gw.complete("explorer", MSGS).cached is False
    assert gw.complete("explorer", MSGS).cached is True
    assert gw.complete("deployer", MSGS).cached is False
    assert gw.complete("deployer", MSGS).cached is False


def test_context_overflow(tmp_path):
    gw = make_gateway(tmp_path, {}, context_limit=10)
    with pytest.raises(ContextOverflow):
        gw.complete("explorer", [ChatMessage("user", "word " * 50)])


def test_audit_log_sums_match(tmp_path):
    fp = fingerprint("explorer", MSGS)
    gw = make_gateway(tmp_path, {fp: "four tokens right here"})
    mark = gw.log_mark()
    for _ in range(3):
        gw.complete("explorer", MSGS)
    usage = gw.usage_since(mark)
    assert usage["calls"] == 3
    assert usage["completion_tokens"] == 3 * count_tokens("four tokens right here")
    assert usage["prompt_tokens"] == sum(e.prompt_tokens for e in gw.log[mark:])


# -- http retry contract ---------------------------------------------------


class FlakyClient:
    """Fails with transient errors n times, then succeeds."""

    def __init__(self, failures):
        self.failures = failures
        self.calls = 0

    def post(self, url, json=None, headers=None):
        self.calls += 1
        if self.calls <= self.failures:
            class R:
                status_code = 503
                text = "unavailable"
            return R()

        class OK:
            status_code = 200

            @staticmethod
            def json():
                return {"choices": [{"message": {"content": "done"}}]}

        return OK()


def test_http_two_transient_then_success_records_three_attempts():
    provider = HttpProvider("http://x", "m", client=FlakyClient(2), max_retries=3, backoff=0.0)
    text, attempts = provider.complete("fp", MSGS, 0.0, 64)
    assert text == "done"
    assert attempts == 3


def test_http_retries_exhausted():
    provider = HttpProvider("http://x", "m", client=FlakyClient(99), max_retries=2, backoff=0.0)
    with pytest.raises(ProviderUnavailable):
        provider.complete("fp", MSGS, 0.0, 64)


def test_http_hard_error_no_retry():
    class Denied:
        def post(self, url, json=None, headers=None):
            class R:
                status_code = 401
                text = "no"
            return R()

    provider = HttpProvider("http://x", "m", client=Denied(), max_retries=3, backoff=0.0)
    with pytest.raises(ProviderUnavailable):
        provider.complete("fp", MSGS, 0.0, 64)


# -- embeddings ------------------------------------------------------------


def test_embed_deterministic_unit_norm():
    a = embed("interface for stock prices")
    b = embed("interface for stock prices")
    assert cosine(a, b) == pytest.approx(1.0, abs=1e-12)
    assert sum(v * v for v in a) == pytest.approx(1.0, abs=1e-6)
    assert len(a) == 256


def test_embed_related_texts_cosine_between_zero_and_one():
    c = cosine(embed("query GDP by year"), embed("query CPI by year"))
    assert 0.0 < c < 1.0
    assert c == pytest.approx(0.6710526315789476, abs=1e-12)  # frozen from this embedder


def test_embed_empty_rejected():
    with pytest.raises(EmptyText):
        embed("")
    with pytest.raises(EmptyText):
        embed("   ")


@given(st.text(alphabet=st.characters(whitelist_categories=("Ll", "Nd", "Zs")), min_size=1).filter(str.strip))
def test_embed_always_unit_norm(text):
    v = embed(text)
    assert sum(x * x for x in v) == pytest.approx(1.0, abs=1e-6)
    assert all(x >= 0.0 for x in v)


# -- token counting --------------------------------------------------------


def test_count_tokens_basics():
    assert count_tokens("a b c") == 3
    assert count_tokens("") == 0
    assert count_tokens("plot(x, y)") == 6


def test_plan_json_cheaper_than_code_listing(root):
    plan_text = (root / "fixtures" / "plans" / "serial_maotai.json").read_text(encoding="utf-8")
    code_listing = (root / "fixtures" / "plans" / "serial_maotai_direct.py.txt").read_text(encoding="utf-8")
    assert count_tokens(plan_text) < count_tokens(code_listing)


# -- misc gateway contract -------------------------------------------------


def test_requires_user_message(tmp_path):
    gw = make_gateway(tmp_path, {})
    with pytest.raises(ValueError):
        gw.complete("explorer", [ChatMessage("system", "only system")])


def test_callable_gateway_roundtrip():
    gw = callable_gateway(EngineConfig(), lambda messages: f"echo:{messages[-1].text}")
    assert gw.complete("deployer", [ChatMessage("user", "ping")]).text == "echo:ping"
