"""Ranking metrics (F1@20, MRR, Recall@1000), the query/candidate
term-overlap diagnostic, and query-set aggregation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .analysis import AnalyzerConfig, analyze, stopwords
from .corpus import Corpus, Paper
from .errors import EvaluationError
from .index import RankedList


def f1_at_k(ranked: RankedList, relevant, k: int = 20) -> float:
    """Harmonic mean of precision and recall over the top k.

    Precision's denominator is min(k, list length) so short result
    lists are not penalized for docs they never returned.
    """
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = set(relevant)
    top = ranked.ids()[:k]
    hits = sum(1 for doc_id in top if doc_id in relevant)
    if hits == 0:
        return 0.0
    precision = hits / min(k, len(ranked))
    recall = hits / len(relevant)
    return 2.0 * precision * recall / (precision + recall)


def mrr(ranked: RankedList, relevant, depth: int = 1000) -> float:
    """Reciprocal rank of the first relevant doc within depth, else 0."""
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    relevant = set(relevant)
    for rank, doc_id in enumerate(ranked.ids()[:depth], start=1):
        if doc_id in relevant:
            return 1.0 / rank
    return 0.0


def recall_at_k(ranked: RankedList, relevant, k: int = 1000) -> float:
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    relevant = set(relevant)
    top = set(ranked.ids()[:k])
    return len(top & relevant) / len(relevant)


def term_overlap(query: Paper, candidate: Paper, stop_terms=None,
                 analyzer: AnalyzerConfig | None = None) -> float:
    """Fraction of the candidate's distinct non-stopword terms that also
    appear in the query. Asymmetric by design (candidate-side
    denominator); 0 when the candidate has no non-stopword terms.
    """
    if stop_terms is None:
        stop_terms = stopwords()
    # stopwords are excluded here explicitly, so analysis keeps them
    config = analyzer if analyzer is not None else AnalyzerConfig(remove_stopwords=False)
    q_terms = {t for t in analyze(query.text(), config) if t not in stop_terms}
    c_terms = {t for t in analyze(candidate.text(), config) if t not in stop_terms}
    if not c_terms:
        return 0.0
    return len(c_terms & q_terms) / len(c_terms)


@dataclass
class QueryMetrics:
    f1_at_20: float
    mrr: float
    recall_at_1000: float
    term_overlap: float | None = None


@dataclass
class MetricsReport:
    per_query: dict[str, QueryMetrics]
    mean_f1_at_20: float
    mean_mrr: float
    mean_recall_at_1000: float
    mean_term_overlap: float | None = None
    query_count: int = 0
    extras: dict = field(default_factory=dict)

    def as_table(self) -> str:
        rows = [
            ("Queries", f"{self.query_count}"),
            ("F1@20", f"{self.mean_f1_at_20:.4f}"),
            ("MRR", f"{self.mean_mrr:.4f}"),
            ("R@1000", f"{self.mean_recall_at_1000:.4f}"),
        ]
        if self.mean_term_overlap is not None:
            rows.append(("Term overlap", f"{self.mean_term_overlap:.4f}"))
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def evaluate(run, qrels: dict[str, frozenset[str]],
             f1_k: int = 20, mrr_depth: int = 1000, recall_k: int = 1000,
             corpus: Corpus | None = None, overlap_depth: int | None = None,
             analyzer: AnalyzerConfig | None = None) -> MetricsReport:
    """Per-query metrics plus arithmetic means over all qrels queries.

    ``run`` is a RunResult or a plain {query id: RankedList} mapping.
    Queries present in qrels but absent from the run score zero and are
    counted; a run query missing from qrels is an error. Term overlap is
    computed only when a corpus (for document texts) is supplied.
    """
    rankings: dict[str, RankedList] = getattr(run, "rankings", run)
    for qid in rankings:
        if qid not in qrels:
            raise EvaluationError(f"run contains query {qid!r} with no qrels entry")
    overlap_config = analyzer if analyzer is not None else AnalyzerConfig(remove_stopwords=False)
    stops = stopwords()
    per_query: dict[str, QueryMetrics] = {}
    for qid in sorted(qrels):
        relevant = qrels[qid]
        if not relevant:
            raise EvaluationError(f"qrels entry for {qid!r} is empty")
        ranked = rankings.get(qid, RankedList(query_id=qid, entries=[]))
        overlap = None
        if corpus is not None and qid in corpus:
            query_paper = corpus[qid]
            doc_ids = ranked.ids()
            if overlap_depth is not None:
                doc_ids = doc_ids[:overlap_depth]
            values = [term_overlap(query_paper, corpus[d], stops, overlap_config)
                      for d in doc_ids if d in corpus]
            overlap = sum(values) / len(values) if values else 0.0
        per_query[qid] = QueryMetrics(
            f1_at_20=f1_at_k(ranked, relevant, k=f1_k),
            mrr=mrr(ranked, relevant, depth=mrr_depth),
            recall_at_1000=recall_at_k(ranked, relevant, k=recall_k),
            term_overlap=overlap,
        )
    n = len(per_query)
    overlaps = [m.term_overlap for m in per_query.values() if m.term_overlap is not None]
    return MetricsReport(
        per_query=per_query,
        mean_f1_at_20=sum(m.f1_at_20 for m in per_query.values()) / n if n else 0.0,
        mean_mrr=sum(m.mrr for m in per_query.values()) / n if n else 0.0,
        mean_recall_at_1000=sum(m.recall_at_1000 for m in per_query.values()) / n if n else 0.0,
        mean_term_overlap=(sum(overlaps) / len(overlaps)) if overlaps else None,
        query_count=n,
    )
