"""Multi-iteration retrieve/navigate/rerank pipeline, training-pair
export, query building, and the citation-budget sweep.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field

from .analysis import AnalyzerConfig
from .corpus import Corpus, Paper, QuerySet
from .errors import PipelineStageError
from .evaluation import recall_at_k
from .index import InvertedIndex, RankedList, bm25_search
from .navigation import CandidatePool, navigate, pool_to_candidates
from .rerank import TokenBudget, TrainingPair, rerank

QUERY_TYPES = ("title", "title_and_abstract", "key_terms")
SAMPLING_MODES = ("bm25_top_k", "add_missed_positives", "add_random_negatives")
KEY_TERM_COUNT = 16


@dataclass
class PipelineConfig:
    iterations: int = 0  # T; 0 means no navigation
    budgets: list[tuple[int, int]] = field(default_factory=list)  # (k_d, k_c) per iteration
    initial_depth: int = 1000
    query_type: str = "title_and_abstract"
    token_budget: TokenBudget = field(default_factory=TokenBudget)
    scorer_spec: str = "identity"
    tie_break: str = "doc_id"
    seed: int = 0
    max_year_guard: bool = False  # off: corpus filtering already enforces temporal validity

    def validate(self):
        if self.iterations < 0:
            raise ValueError("iteration count must be >= 0")
        if len(self.budgets) != self.iterations:
            raise ValueError(
                f"need one (k_d, k_c) pair per iteration: {self.iterations} iterations, "
                f"{len(self.budgets)} budget pairs")
        for k_d, k_c in self.budgets:
            if k_d < 0 or k_c < 0:
                raise ValueError("budgets must be non-negative")
        if self.initial_depth < 1:
            raise ValueError("initial retrieval depth must be >= 1")
        if self.query_type not in QUERY_TYPES:
            raise ValueError(f"unknown query type {self.query_type!r}")
        if self.tie_break != "doc_id":
            raise ValueError("the only supported tie-break policy is 'doc_id'")
        self.token_budget.validate()

    def fingerprint(self, analyzer: AnalyzerConfig | None = None) -> str:
        payload = {
            "iterations": self.iterations,
            "budgets": [list(b) for b in self.budgets],
            "initial_depth": self.initial_depth,
            "query_type": self.query_type,
            "token_budget": [self.token_budget.max_total, self.token_budget.query_budget,
                             self.token_budget.candidate_budget],
            "scorer": self.scorer_spec,
            "tie_break": self.tie_break,
            "seed": self.seed,
            "max_year_guard": self.max_year_guard,
            "analyzer": analyzer.fingerprint() if analyzer else "",
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class RunResult:
    rankings: dict[str, RankedList]
    fingerprint: str
    pools: dict[str, list[CandidatePool]] = field(default_factory=dict)  # debug, opt-in


def build_query_text(paper: Paper, query_type: str, index: InvertedIndex | None = None) -> str:
    """Query string for first-stage retrieval.

    key_terms picks the top TF*idf terms of the paper's own text against
    the index (constant idf degenerates to a TF ordering).
    """
    if query_type == "title":
        return paper.title
    if query_type == "title_and_abstract":
        return paper.text()
    if query_type == "key_terms":
        if index is None:
            raise ValueError("key_terms queries need an index for idf statistics")
        from .analysis import analyze
        counts: dict[str, int] = {}
        for t in analyze(paper.text(), index.analyzer):
            counts[t] = counts.get(t, 0) + 1
        scored = sorted(counts, key=lambda t: (-counts[t] * index.idf(t), t))
        return " ".join(scored[:KEY_TERM_COUNT])
    raise ValueError(f"unknown query type {query_type!r}")


def run_pipeline(query: Paper, config: PipelineConfig, index: InvertedIndex,
                 corpus: Corpus, scorer, collect_pools: list | None = None) -> RankedList:
    """Run the full method for one query.

    T = 0 degenerates to a single re-rank of the BM25 list, or to raw
    BM25 when the scorer preserves order (identity).
    """
    config.validate()
    query_text = build_query_text(query, config.query_type, index)
    try:
        current = bm25_search(index, query_text, config.initial_depth,
                              exclude=query.id, query_id=query.id)
    except Exception as e:
        raise PipelineStageError(0, "retrieval", e) from e

    max_year = query.year if config.max_year_guard else None
    if config.iterations == 0:
        if getattr(scorer, "preserves_order", False):
            return current
        try:
            return rerank(scorer, query, current.ids(), corpus,
                          config.token_budget, index.analyzer)
        except Exception as e:
            raise PipelineStageError(0, "ranking", e) from e

    for t in range(config.iterations):
        k_d, k_c = config.budgets[t]
        try:
            pool = navigate(current, corpus, k_d, k_c, query.id, max_year=max_year)
        except Exception as e:
            raise PipelineStageError(t, "navigation", e) from e
        if collect_pools is not None:
            collect_pools.append(pool)
        candidates = pool_to_candidates(pool)
        try:
            current = rerank(scorer, query, candidates, corpus,
                             config.token_budget, index.analyzer)
        except Exception as e:
            raise PipelineStageError(t, "ranking", e) from e
    return current


def run_queries(queries: QuerySet, config: PipelineConfig, index: InvertedIndex,
                corpus: Corpus, scorer, collect_pools: bool = False,
                analyzer: AnalyzerConfig | None = None) -> RunResult:
    """Run the pipeline over a query set, keyed and ordered by query id."""
    rankings: dict[str, RankedList] = {}
    pools: dict[str, list[CandidatePool]] = {}
    for q in sorted(queries, key=lambda q: q.id):
        sink: list | None = [] if collect_pools else None
        rankings[q.id] = run_pipeline(q.paper, config, index, corpus, scorer,
                                      collect_pools=sink)
        if collect_pools:
            pools[q.id] = sink
    return RunResult(rankings=rankings,
                     fingerprint=config.fingerprint(analyzer or index.analyzer),
                     pools=pools)


@dataclass
class PairStats:
    total: int
    positives: int
    negatives: int

    @property
    def positive_fraction(self) -> float:
        return self.positives / self.total if self.total else 0.0

    def summary(self) -> str:
        return (f"{self.total} pairs: {self.positives} relevant / {self.negatives} irrelevant "
                f"({100.0 * self.positive_fraction:.1f}% positive)")


def generate_training_pairs(queries: QuerySet, index: InvertedIndex, corpus: Corpus,
                            top_k: int = 10, sampling_mode: str = "bm25_top_k",
                            query_type: str = "title_and_abstract",
                            seed: int = 0) -> tuple[list[TrainingPair], PairStats]:
    """Label each query's BM25 top-k by gold membership.

    add_missed_positives appends gold citations BM25 missed (rank 0);
    add_random_negatives appends top_k random non-gold corpus docs per
    query, seeded per query id so output is stable under reordering.
    """
    if sampling_mode not in SAMPLING_MODES:
        raise ValueError(f"unknown sampling mode {sampling_mode!r}")
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    pairs: list[TrainingPair] = []
    all_ids = corpus.ids()
    for q in queries:
        text = build_query_text(q.paper, query_type, index)
        ranked = bm25_search(index, text, top_k, exclude=q.id)
        retrieved = set()
        for rank, (doc_id, _) in enumerate(ranked.entries, start=1):
            retrieved.add(doc_id)
            pairs.append(TrainingPair(
                query_id=q.id, candidate_id=doc_id,
                relevant=doc_id in q.relevant, rank=rank,
                query_text=q.paper.text(), candidate_text=corpus[doc_id].text()))
        if sampling_mode == "add_missed_positives":
            for doc_id in sorted(q.relevant - retrieved):
                if doc_id in corpus:
                    pairs.append(TrainingPair(
                        query_id=q.id, candidate_id=doc_id, relevant=True, rank=0,
                        query_text=q.paper.text(), candidate_text=corpus[doc_id].text()))
        elif sampling_mode == "add_random_negatives":
            rng = random.Random(f"{seed}:{q.id}")
            excluded = retrieved | q.relevant | {q.id}
            eligible = [pid for pid in all_ids if pid not in excluded]
            for doc_id in rng.sample(eligible, min(top_k, len(eligible))):
                pairs.append(TrainingPair(
                    query_id=q.id, candidate_id=doc_id, relevant=False, rank=0,
                    query_text=q.paper.text(), candidate_text=corpus[doc_id].text()))
    positives = sum(1 for p in pairs if p.relevant)
    stats = PairStats(total=len(pairs), positives=positives, negatives=len(pairs) - positives)
    return pairs, stats


@dataclass
class SweepPoint:
    k_d: int
    k_c: int
    mean_recall: float


@dataclass
class SweepResult:
    best: tuple[int, int]
    curve: list[SweepPoint]


def sweep_budgets(dev_queries: QuerySet, index: InvertedIndex, corpus: Corpus, scorer,
                  grid_step: int = 100, budget_sum: int = 1000,
                  fixed_budgets: tuple = (), initial_depth: int = 1000,
                  query_type: str = "title_and_abstract",
                  token_budget: TokenBudget = TokenBudget(),
                  metric_depth: int = 1000) -> SweepResult:
    """Grid-search one iteration's (k_d, k_c) under k_d + k_c = budget_sum.

    Earlier iterations keep the budgets in ``fixed_budgets``. Returns
    the argmax of mean recall on the dev queries, ties resolved toward
    the larger k_d, plus the full curve.
    """
    if len(dev_queries) == 0:
        raise ValueError("budget sweep needs a non-empty dev query set")
    if grid_step < 1 or budget_sum < 1:
        raise ValueError("grid_step and budget_sum must be positive")
    fixed = [tuple(b) for b in fixed_budgets]
    curve: list[SweepPoint] = []
    best: tuple[int, int] | None = None
    best_recall = -1.0
    for k_d in range(0, budget_sum + 1, grid_step):
        k_c = budget_sum - k_d
        config = PipelineConfig(
            iterations=len(fixed) + 1, budgets=fixed + [(k_d, k_c)],
            initial_depth=initial_depth, query_type=query_type, token_budget=token_budget)
        total = 0.0
        for q in dev_queries:
            ranked = run_pipeline(q.paper, config, index, corpus, scorer)
            total += recall_at_k(ranked, q.relevant, k=metric_depth)
        mean = total / len(dev_queries)
        curve.append(SweepPoint(k_d=k_d, k_c=k_c, mean_recall=mean))
        if best is None or mean >= best_recall:
            best, best_recall = (k_d, k_c), mean
    return SweepResult(best=best, curve=curve)
