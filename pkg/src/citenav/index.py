"""Inverted index and BM25 first-stage retrieval.

BM25 variant: non-negative idf, idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)),
k1 = 0.9, b = 0.4. The query is treated as a set of distinct analyzed
terms; only documents sharing at least one term are scored, so every
returned score is positive.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import AnalyzerConfig, analyze
from .corpus import Corpus

BM25_K1 = 0.9
BM25_B = 0.4

_INDEX_FORMAT = "citenav-index"
_INDEX_VERSION = 1


@dataclass
class RankedList:
    """Scored doc ids for one query, best first, ties by id ascending."""

    query_id: str
    entries: list[tuple[str, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]

    def top(self, k: int) -> list[tuple[str, float]]:
        return self.entries[:k]


class InvertedIndex:
    def __init__(self, postings, doc_lengths, analyzer: AnalyzerConfig):
        self.postings: dict[str, list[tuple[str, int]]] = postings
        self.doc_lengths: dict[str, int] = doc_lengths
        self.analyzer = analyzer
        self.N = len(doc_lengths)
        self.avgdl = (sum(doc_lengths.values()) / self.N) if self.N else 0.0
        self.fingerprint = analyzer.fingerprint()

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.N - df + 0.5) / (df + 0.5))

    def _tf_part(self, tf: int, doc_id: str) -> float:
        norm = BM25_K1 * (1.0 - BM25_B + BM25_B * self.doc_lengths[doc_id] / self.avgdl)
        return tf * (BM25_K1 + 1.0) / (tf + norm)

    def term_frequency(self, term: str, doc_id: str) -> int:
        plist = self.postings.get(term)
        if not plist:
            return 0
        i = bisect.bisect_left(plist, doc_id, key=lambda entry: entry[0])
        if i < len(plist) and plist[i][0] == doc_id:
            return plist[i][1]
        return 0

    def score_doc(self, query_terms, doc_id: str) -> float:
        """BM25 score of one indexed document for pre-analyzed query terms."""
        if doc_id not in self.doc_lengths:
            return 0.0
        score = 0.0
        for term in sorted(set(query_terms)):
            tf = self.term_frequency(term, doc_id)
            if tf:
                score += self.idf(term) * self._tf_part(tf, doc_id)
        return score

    def search_terms(self, query_terms, k: int, exclude: str | None = None) -> list[tuple[str, float]]:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scores: dict[str, float] = {}
        for term in sorted(set(query_terms)):
            postings = self.postings.get(term)
            if not postings:
                continue
            idf = self.idf(term)
            for doc_id, tf in postings:
                scores[doc_id] = scores.get(doc_id, 0.0) + idf * self._tf_part(tf, doc_id)
        if exclude is not None:
            scores.pop(exclude, None)
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        return ranked[:k]

    def save(self, path: str | Path) -> None:
        """Write a self-describing JSON artifact; deterministic bytes."""
        payload = {
            "format": _INDEX_FORMAT,
            "version": _INDEX_VERSION,
            "analyzer": self.analyzer.to_dict(),
            "fingerprint": self.fingerprint,
            "doc_lengths": self.doc_lengths,
            "postings": {t: [[d, tf] for d, tf in plist] for t, plist in self.postings.items()},
        }
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path, expected_analyzer: AnalyzerConfig | None = None) -> "InvertedIndex":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != _INDEX_FORMAT or payload.get("version") != _INDEX_VERSION:
            raise ValueError(f"{path} is not a recognized index artifact")
        analyzer = AnalyzerConfig.from_dict(payload["analyzer"])
        if payload.get("fingerprint") != analyzer.fingerprint():
            raise ValueError(f"{path}: embedded analyzer fingerprint does not match its config")
        if expected_analyzer is not None and expected_analyzer.fingerprint() != payload["fingerprint"]:
            raise ValueError(
                "index analyzer fingerprint mismatch: "
                f"expected {expected_analyzer.fingerprint()}, found {payload['fingerprint']}"
            )
        postings = {t: [(d, int(tf)) for d, tf in plist] for t, plist in payload["postings"].items()}
        doc_lengths = {d: int(v) for d, v in payload["doc_lengths"].items()}
        return cls(postings, doc_lengths, analyzer)


def build_index(corpus: Corpus, config: AnalyzerConfig = AnalyzerConfig()) -> InvertedIndex:
    """Index every paper's title+abstract text."""
    if len(corpus) == 0:
        raise ValueError("cannot build an index over an empty corpus")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc_id in sorted(corpus.papers):
        tokens = analyze(corpus.papers[doc_id].text(), config)
        doc_lengths[doc_id] = len(tokens)
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for term in sorted(counts):
            postings.setdefault(term, []).append((doc_id, counts[term]))
    return InvertedIndex(postings, doc_lengths, config)


def bm25_search(index: InvertedIndex, query_text: str, k: int, exclude: str | None = None,
                query_id: str = "") -> RankedList:
    """Top-k BM25 retrieval; the excluded id (the query paper) never appears."""
    terms = analyze(query_text, index.analyzer)
    return RankedList(query_id=query_id, entries=index.search_terms(terms, k, exclude=exclude))
