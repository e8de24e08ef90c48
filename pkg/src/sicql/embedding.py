"""Deterministic hashed bag-of-words embeddings.

Lowercase, split on non-alphanumerics, hash each token into a fixed number
of buckets (stable across processes via sha1, unlike ``hash()``), and
L2-normalize the counts. Used for constraint recommendation and the
few-shot exemplar cache; external embedding clients can be plugged in
wherever an ``embed_fn`` is accepted.
"""

from __future__ import annotations

import hashlib
import math
import re

DEFAULT_BUCKETS = 256

_TOKEN = re.compile(r"[a-z0-9]+")


def hash_embed(text: str, buckets: int = DEFAULT_BUCKETS) -> list[float]:
    vec = [0.0] * buckets
    for token in _TOKEN.findall(text.lower()):
        digest = hashlib.sha1(token.encode("utf-8")).digest()
        vec[int.from_bytes(digest[:4], "big") % buckets] += 1.0
    norm = math.sqrt(sum(x * x for x in vec))
    if norm > 0:
        vec = [x / norm for x in vec]
    return vec


def cosine(a: list[float], b: list[float]) -> float:
    if len(a) != len(b):
        raise ValueError(f"vector lengths differ: {len(a)} vs {len(b)}")
    return sum(x * y for x, y in zip(a, b))
