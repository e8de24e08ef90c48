"""Few-shot exemplar cache for retry prompts.

Keys on (operator alias, hashed bag-of-words of the rendered prompt);
lookups return the nearest passing input/output pairs by cosine similarity.
Bounded LRU so long runs cannot grow without limit. Thread-safe.
"""

from __future__ import annotations

import threading
from collections import OrderedDict

from sicql.embedding import cosine, hash_embed

PROMPT_EXCERPT = 200


class ExemplarCache:
    def __init__(self, capacity: int = 256):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._entries: OrderedDict[tuple[str, str], tuple[list[float], str, str]] = OrderedDict()

    def add(self, op_alias: str, prompt: str, output: str) -> None:
        key = (op_alias, prompt)
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                return
            self._entries[key] = (hash_embed(prompt), prompt[:PROMPT_EXCERPT], output)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)

    def lookup(self, op_alias: str, prompt: str, k: int) -> list[tuple[str, str]]:
        """Up to k (prompt excerpt, output) pairs, most similar first."""
        if k <= 0:
            return []
        query = hash_embed(prompt)
        with self._lock:
            scored = []
            for i, ((alias, key_prompt), (vec, excerpt, output)) in enumerate(self._entries.items()):
                if alias != op_alias or key_prompt == prompt:
                    continue
                scored.append((-cosine(query, vec), i, excerpt, output))
        scored.sort()
        return [(excerpt, output) for _, _, excerpt, output in scored[:k]]

    def __len__(self) -> int:
        return len(self._entries)
