"""Hashed token TF-IDF embeddings, 256 dims, L2-normalized.

Fallback embedder used when no embedding provider is configured (the
only mode exercised here). Buckets are unsigned so every component is
non-negative and cosine similarity lands in [0, 1].
"""

from __future__ import annotations

import hashlib
import math
import re

from ..errors import EmptyText

DIMS = 256

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

# common glue words get damped instead of dropped so very short texts
# still embed to something non-zero
_STOPWORDS = frozenset(
    """a an and are as at be by for from in is it of on or that the this to was
    what when which with""".split()
)
_STOP_WEIGHT = 0.2


def _bucket(token: str) -> int:
    digest = hashlib.md5(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") % DIMS


def embed(text: str) -> list[float]:
    if not text or not text.strip():
        raise EmptyText("cannot embed empty text")
    counts: dict[str, int] = {}
    for token in _TOKEN.findall(text.lower()):
        counts[token] = counts.get(token, 0) + 1
    vec = [0.0] * DIMS
    for token, tf in counts.items():
        weight = 1.0 + math.log(tf)
        if token in _STOPWORDS:
            weight *= _STOP_WEIGHT
        vec[_bucket(token)] += weight
    norm = math.sqrt(sum(v * v for v in vec))
    if norm == 0.0:  # pragma: no cover - tokenizer yields nothing only for empty input
        raise EmptyText("text has no embeddable tokens")
    return [v / norm for v in vec]


def cosine(a: list[float], b: list[float]) -> float:
    return sum(x * y for x, y in zip(a, b))
