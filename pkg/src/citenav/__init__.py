"""Citation recommendation engine: BM25 candidate generation,
citation-graph navigation, and pluggable re-ranking."""

from .analysis import AnalyzerConfig, analyze, stopwords
from .corpus import (Corpus, Paper, Query, QuerySet, SplitSpec, corpus_stats,
                     filter_corpus, ingest_corpus, split_by_year, write_corpus)
from .dedup import jaccard, remove_leaked, title_signature
from .evaluation import MetricsReport, evaluate, f1_at_k, mrr, recall_at_k, term_overlap
from .index import InvertedIndex, RankedList, bm25_search, build_index
from .navigation import CandidatePool, navigate, pool_to_candidates
from .pipeline import (PipelineConfig, RunResult, build_query_text,
                       generate_training_pairs, run_pipeline, run_queries,
                       sweep_budgets)
from .rerank import (ExternalScorer, IdentityScorer, LexicalScorer, PairInput,
                     TokenBudget, TrainingPair, assemble_pair, lexical_features,
                     rerank, score, train_lexical_scorer, truncate_pair)

__version__ = "0.1.0"

__all__ = [
    "AnalyzerConfig", "analyze", "stopwords",
    "Corpus", "Paper", "Query", "QuerySet", "SplitSpec",
    "corpus_stats", "filter_corpus", "ingest_corpus", "split_by_year", "write_corpus",
    "jaccard", "remove_leaked", "title_signature",
    "MetricsReport", "evaluate", "f1_at_k", "mrr", "recall_at_k", "term_overlap",
    "InvertedIndex", "RankedList", "bm25_search", "build_index",
    "CandidatePool", "navigate", "pool_to_candidates",
    "PipelineConfig", "RunResult", "build_query_text", "generate_training_pairs",
    "run_pipeline", "run_queries", "sweep_budgets",
    "ExternalScorer", "IdentityScorer", "LexicalScorer", "PairInput",
    "TokenBudget", "TrainingPair", "assemble_pair", "lexical_features",
    "rerank", "score", "train_lexical_scorer", "truncate_pair",
    "__version__",
]
