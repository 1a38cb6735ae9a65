"""Deterministic token counting.

Not a model tokenizer. Acceptance checks compare ratios between runs
counted the same way, so a stable approximation is enough: every run of
word characters is one token, every other non-space character is one
token on its own.
"""

import re

_LEXEME = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def count_tokens(text: str) -> int:
    if not text:
        return 0
    return len(_LEXEME.findall(text))


def count_message_tokens(messages) -> int:
    # small per-message overhead, mirroring chat-format framing
    return sum(count_tokens(m.text) + 4 for m in messages)
