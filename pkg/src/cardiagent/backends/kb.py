"""Local knowledge store with deterministic tf-idf retrieval."""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field

__all__ = ["KnowledgeBase", "Snippet"]

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass
class Snippet:
    doc_id: str
    title: str
    source: str
    score: float
    text: str


@dataclass
class KnowledgeBase:
    docs: dict[str, dict] = field(default_factory=dict)
    index: dict[str, dict[str, int]] = field(default_factory=dict)  # term -> doc -> tf

    def ingest(self, documents: list[dict]) -> dict:
        """Index documents {id, title, text, source}; duplicate ids rejected."""
        for doc in documents:
            if not doc.get("text"):
                raise ValueError(f"document {doc.get('id')!r} has empty text")
            doc_id = doc["id"]
            if doc_id in self.docs:
                raise ValueError(f"duplicate document id {doc_id!r}")
            self.docs[doc_id] = doc
            for term in tokenize(doc["text"] + " " + doc.get("title", "")):
                self.index.setdefault(term, {})
                self.index[term][doc_id] = self.index[term].get(doc_id, 0) + 1
        return self.summary()

    def summary(self) -> dict:
        digest = hashlib.sha256(
            json.dumps({t: dict(sorted(d.items())) for t, d in sorted(self.index.items())},
                       sort_keys=True).encode()).hexdigest()
        return {"documents": len(self.docs), "terms": len(self.index), "hash": digest}

    def score(self, doc_id: str, query_terms: list[str]) -> float:
        n = len(self.docs)
        total = 0.0
        for term in query_terms:
            postings = self.index.get(term)
            if not postings or doc_id not in postings:
                continue
            idf = math.log(n / len(postings))
            total += postings[doc_id] * idf
        return total

    def retrieve(self, query: str, k: int = 3) -> list[Snippet]:
        """Top-k documents by tf-idf, stable tie-break by document id."""
        if not self.docs:
            raise ValueError("empty index")
        terms = tokenize(query)
        scored = [(self.score(doc_id, terms), doc_id) for doc_id in self.docs]
        scored = [(s, d) for s, d in scored if s > 0]
        scored.sort(key=lambda sd: (-sd[0], sd[1]))
        out = []
        for score, doc_id in scored[:k]:
            doc = self.docs[doc_id]
            out.append(Snippet(doc_id=doc_id, title=doc.get("title", ""),
                               source=doc.get("source", ""), score=score,
                               text=_excerpt(doc["text"], terms)))
        return out


def _excerpt(text: str, terms: list[str], width: int = 240) -> str:
    lower = text.lower()
    for term in terms:
        pos = lower.find(term)
        if pos >= 0:
            start = max(0, pos - width // 4)
            return text[start:start + width].strip()
    return text[:width].strip()
