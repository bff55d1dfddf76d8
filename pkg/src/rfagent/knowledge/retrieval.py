"""Deterministic lexical retrieval over the command documentation corpus.

Plain term-frequency scoring with smoothed inverse document frequency, no
randomness, ties broken by command path so identical queries always return
the same list in the same order.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .types import ScpiDocEntry

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class RetrievalHit:
    entry: ScpiDocEntry
    score: float


class LexicalIndex:
    def __init__(self, entries: list[ScpiDocEntry]):
        self.entries = sorted(entries, key=lambda e: e.command_path)
        self._doc_tokens: list[dict[str, int]] = []
        df: dict[str, int] = {}
        for entry in self.entries:
            counts: dict[str, int] = {}
            for token in tokenize(entry.command_path + " " + entry.description):
                counts[token] = counts.get(token, 0) + 1
            self._doc_tokens.append(counts)
            for token in counts:
                df[token] = df.get(token, 0) + 1
        n = len(self.entries)
        self._idf = {token: math.log((1 + n) / (1 + count)) + 1.0 for token, count in df.items()}

    def retrieve(self, query: str, k: int = 3) -> list[RetrievalHit]:
        tokens = tokenize(query)
        if not tokens or not self.entries:
            return []
        scored: list[tuple[float, str, ScpiDocEntry]] = []
        for entry, counts in zip(self.entries, self._doc_tokens):
            score = 0.0
            for token in tokens:
                tf = counts.get(token, 0)
                if tf:
                    score += tf * self._idf[token]
            if score > 0.0:
                scored.append((score, entry.command_path, entry))
        scored.sort(key=lambda item: (-item[0], item[1]))
        return [RetrievalHit(entry=e, score=s) for s, _, e in scored[:k]]
