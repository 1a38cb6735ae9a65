"""Chat completion providers: scripted tape, HTTP, in-process callable."""

from __future__ import annotations

import json
import time
from pathlib import Path

from ..errors import ProviderUnavailable, TapeMiss


class ScriptedProvider:
    """Replays canned responses from a JSON tape: {fingerprint: response}.

    Lookups are exact. Read-only after load, safe to share across threads.
    """

    name = "scripted"

    def __init__(self, tape_path: str | Path):
        self.tape_path = Path(tape_path)
        try:
            self._entries: dict[str, str] = json.loads(self.tape_path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ProviderUnavailable(f"tape not found: {self.tape_path}") from None

    def complete(self, fp: str, messages, temperature: float, max_tokens: int) -> tuple[str, int]:
        try:
            return self._entries[fp], 1
        except KeyError:
            preview = messages[-1].text[:160].replace("\n", " ")
            raise TapeMiss(f"fingerprint {fp} not in {self.tape_path.name}; last message: {preview!r}") from None


class RecordingProvider:
    """Wraps another provider and appends every exchange to a tape file."""

    def __init__(self, inner, tape_path: str | Path):
        self.inner = inner
        self.name = inner.name
        self.tape_path = Path(tape_path)
        self._entries: dict[str, str] = {}
        if self.tape_path.exists():
            self._entries = json.loads(self.tape_path.read_text(encoding="utf-8"))

    def complete(self, fp: str, messages, temperature: float, max_tokens: int):
        text, attempts = self.inner.complete(fp, messages, temperature, max_tokens)
        self._entries[fp] = text
        return text, attempts

    def flush(self) -> None:
        self.tape_path.parent.mkdir(parents=True, exist_ok=True)
        self.tape_path.write_text(
            json.dumps(self._entries, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
            encoding="utf-8",
        )


class CallableProvider:
    """Adapts a plain function(messages) -> str. Used by tests and recorders."""

    name = "callable"

    def __init__(self, fn):
        self.fn = fn

    def complete(self, fp: str, messages, temperature: float, max_tokens: int) -> tuple[str, int]:
        return self.fn(messages), 1


class HttpProvider:
    """OpenAI-compatible chat completions over HTTP with retry/backoff."""

    name = "http"

    def __init__(self, endpoint: str, model: str, api_key: str = "", max_retries: int = 3,
                 client=None, backoff: float = 0.5):
        import httpx

        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.max_retries = max(1, max_retries)
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=60.0)

    def complete(self, fp: str, messages, temperature: float, max_tokens: int) -> tuple[str, int]:
        payload = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.text} for m in messages],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error = None
        for attempt in range(1, self.max_retries + 1):
            try:
                resp = self._client.post(
                    f"{self.endpoint}/chat/completions", json=payload, headers=headers
                )
            except Exception as exc:
                last_error = exc
            else:
                if resp.status_code == 200:
                    body = resp.json()
                    return body["choices"][0]["message"]["content"], attempt
                if resp.status_code in (429, 500, 502, 503, 504):
                    last_error = RuntimeError(f"HTTP {resp.status_code}")
                else:
                    raise ProviderUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if attempt < self.max_retries:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
        raise ProviderUnavailable(f"retries exhausted after {self.max_retries} attempts: {last_error}")
