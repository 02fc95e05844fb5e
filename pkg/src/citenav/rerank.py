"""Second-stage ranking: pair assembly under a token budget, pluggable
relevance scorers, and sorting.

Three scorer variants:

* ``IdentityScorer`` scores by input position, so re-ranking preserves
  the incoming order (used for first-stage baselines and sweeps).
* ``LexicalScorer`` is a logistic model over a fixed lexical feature
  map, trained with pointwise binary cross-entropy.
* ``ExternalScorer`` delegates to a separate process speaking the
  citenav-scorer wire protocol (see :mod:`citenav.wire`); raw texts are
  sent so the external model can apply its own tokenizer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import AnalyzerConfig, analyze, stopwords
from .corpus import Corpus, Paper
from .dedup import jaccard
from .index import InvertedIndex, RankedList


@dataclass(frozen=True)
class TokenBudget:
    max_total: int = 512
    query_budget: int = 256
    candidate_budget: int = 256

    def validate(self):
        if self.max_total < 2 or self.query_budget < 1 or self.candidate_budget < 1:
            raise ValueError("token budgets must be positive (max_total >= 2)")
        if self.query_budget + self.candidate_budget > self.max_total:
            raise ValueError("per-side budgets exceed max_total")


@dataclass
class PairInput:
    pair_id: str
    query_tokens: list[str]
    candidate_tokens: list[str]
    # raw texts travel along for external scorers, which re-tokenize;
    # title tokens feed the title-overlap feature of the lexical scorer
    query_text: str = ""
    candidate_text: str = ""
    query_title_tokens: list[str] = field(default_factory=list)
    candidate_title_tokens: list[str] = field(default_factory=list)


@dataclass
class TrainingPair:
    query_id: str
    candidate_id: str
    relevant: bool
    rank: int  # 1-based BM25 rank; 0 = not retrieved (appended pair)
    query_text: str
    candidate_text: str


def truncate_pair(q_tokens, c_tokens, max_total: int):
    """Shrink both sides to fit max_total.

    Equivalent to removing one token at a time from the end of the
    currently longer sequence (candidate first on ties) until the total
    fits; both outputs are prefixes of the inputs.
    """
    if max_total < 2:
        raise ValueError("max_total must be >= 2")
    if len(q_tokens) + len(c_tokens) <= max_total:
        return list(q_tokens), list(c_tokens)
    half_up = (max_total + 1) // 2
    q_len = min(len(q_tokens), max(half_up, max_total - len(c_tokens)))
    c_len = min(len(c_tokens), max_total - q_len)
    return list(q_tokens[:q_len]), list(c_tokens[:c_len])


def assemble_pair(query: Paper, candidate: Paper, budget: TokenBudget = TokenBudget(),
                  analyzer: AnalyzerConfig = AnalyzerConfig(),
                  pair_id: str | None = None) -> PairInput:
    """Analyze both papers, cap each side at its budget, then fit the total."""
    budget.validate()
    q_tokens = analyze(query.text(), analyzer)[: budget.query_budget]
    c_tokens = analyze(candidate.text(), analyzer)[: budget.candidate_budget]
    q_tokens, c_tokens = truncate_pair(q_tokens, c_tokens, budget.max_total)
    return PairInput(
        pair_id=pair_id if pair_id is not None else candidate.id,
        query_tokens=q_tokens,
        candidate_tokens=c_tokens,
        query_text=query.text(),
        candidate_text=candidate.text(),
        query_title_tokens=analyze(query.title, analyzer),
        candidate_title_tokens=analyze(candidate.title, analyzer),
    )


FEATURE_NAMES = (
    "candidate_term_overlap",
    "bm25_per_query_token",
    "title_jaccard",
    "log_candidate_length",
    "query_term_coverage",
)


def lexical_features(pair: PairInput, index: InvertedIndex) -> list[float]:
    """Fixed-order lexical feature vector for one pair."""
    stops = stopwords()
    q_terms = {t for t in pair.query_tokens if t not in stops}
    c_terms = {t for t in pair.candidate_tokens if t not in stops}
    overlap = len(c_terms & q_terms) / len(c_terms) if c_terms else 0.0

    bm25 = index.score_doc(pair.query_tokens, pair.pair_id)
    bm25_norm = bm25 / max(1, len(pair.query_tokens))

    title_sim = jaccard(set(pair.query_title_tokens), set(pair.candidate_title_tokens))

    q_all = set(pair.query_tokens)
    c_all = set(pair.candidate_tokens)
    coverage = len(q_all & c_all) / len(q_all) if q_all else 0.0

    return [overlap, bm25_norm, title_sim, math.log1p(len(pair.candidate_tokens)), coverage]


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_and_grad(weights, bias, features, labels):
    """Summed binary cross-entropy and its gradient.

    loss = -sum_pos log p - sum_neg log(1 - p) with p = sigmoid(w.x + b).
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    z = X @ w + bias
    # softplus(z) - y*z is the stable per-example form of the loss
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z))
    residual = _sigmoid(z) - y
    return loss, residual @ X, float(np.sum(residual))


class IdentityScorer:
    """Scores by input position; re-ranking with it is a no-op."""

    name = "identity"
    preserves_order = True

    def score_pairs(self, pairs) -> list[float]:
        n = len(pairs)
        return [(n - i) / n for i in range(n)]


class LexicalScorer:
    """Logistic model over the lexical feature map."""

    name = "lexical"
    preserves_order = False

    def __init__(self, weights, bias: float, index: InvertedIndex, final_loss: float | None = None):
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} weights, got {self.weights.shape}")
        self.bias = float(bias)
        self.index = index
        self.final_loss = final_loss

    def score_pairs(self, pairs) -> list[float]:
        if not pairs:
            return []
        X = np.array([lexical_features(p, self.index) for p in pairs], dtype=np.float64)
        return [float(v) for v in _sigmoid(X @ self.weights + self.bias)]

    def save(self, path: str | Path) -> None:
        payload = {
            "format": "citenav-lexical-scorer",
            "version": 1,
            "feature_names": list(FEATURE_NAMES),
            "weights": [float(w) for w in self.weights],
            "bias": self.bias,
            "final_loss": self.final_loss,
            "analyzer_fingerprint": self.index.fingerprint,
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, index: InvertedIndex) -> "LexicalScorer":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != "citenav-lexical-scorer":
            raise ValueError(f"{path} is not a lexical scorer model file")
        return cls(payload["weights"], payload["bias"], index, payload.get("final_loss"))


class ExternalScorer:
    """Adapter from PairInput batches to the wire protocol."""

    name = "external"
    preserves_order = False

    def __init__(self, connection):
        self.connection = connection

    def score_pairs(self, pairs) -> list[float]:
        if not pairs:
            return []
        requests = [
            {"id": p.pair_id, "query": p.query_text, "candidate": p.candidate_text}
            for p in pairs
        ]
        by_id = self.connection.score_batch(requests, batch_context=pairs)
        return [by_id[p.pair_id] for p in pairs]


def _pair_input_from_training_pair(tp: TrainingPair, corpus: Corpus | None,
                                   budget: TokenBudget, analyzer: AnalyzerConfig) -> PairInput:
    q_paper = corpus.get(tp.query_id) if corpus is not None else None
    c_paper = corpus.get(tp.candidate_id) if corpus is not None else None
    q_tokens = analyze(tp.query_text, analyzer)[: budget.query_budget]
    c_tokens = analyze(tp.candidate_text, analyzer)[: budget.candidate_budget]
    q_tokens, c_tokens = truncate_pair(q_tokens, c_tokens, budget.max_total)
    return PairInput(
        pair_id=tp.candidate_id,
        query_tokens=q_tokens,
        candidate_tokens=c_tokens,
        query_text=tp.query_text,
        candidate_text=tp.candidate_text,
        query_title_tokens=analyze(q_paper.title, analyzer) if q_paper else [],
        candidate_title_tokens=analyze(c_paper.title, analyzer) if c_paper else [],
    )


def train_lexical_scorer(pairs, index: InvertedIndex, epochs: int = 500,
                         learning_rate: float = 0.1, seed: int = 0,
                         corpus: Corpus | None = None,
                         budget: TokenBudget = TokenBudget(),
                         analyzer: AnalyzerConfig | None = None) -> LexicalScorer:
    """Fit the logistic scorer on labeled pairs by gradient descent.

    The loss is the summed cross-entropy; each step uses the mean
    gradient so the learning rate does not need retuning with dataset
    size. Deterministic for a fixed seed. Raises if only one label
    class is present (the loss is degenerate).
    """
    if not pairs:
        raise ValueError("no training pairs")
    labels = [1.0 if p.relevant else 0.0 for p in pairs]
    if len(set(labels)) < 2:
        raise ValueError("training pairs must contain both relevant and irrelevant examples")
    analyzer = analyzer if analyzer is not None else index.analyzer
    X = np.array(
        [lexical_features(_pair_input_from_training_pair(p, corpus, budget, analyzer), index)
         for p in pairs],
        dtype=np.float64,
    )
    y = np.array(labels, dtype=np.float64)
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, size=X.shape[1])
    b = 0.0
    n = len(pairs)
    for _ in range(epochs):
        _, grad_w, grad_b = logistic_loss_and_grad(w, b, X, y)
        w = w - learning_rate * grad_w / n
        b = b - learning_rate * grad_b / n
    loss, _, _ = logistic_loss_and_grad(w, b, X, y)
    return LexicalScorer(w, b, index, final_loss=loss)


def score(model, pairs) -> list[float]:
    """Probabilities in [0, 1], order-aligned with the input pairs."""
    return model.score_pairs(pairs)


def rerank(model, query: Paper, candidates, corpus: Corpus,
           budget: TokenBudget = TokenBudget(),
           analyzer: AnalyzerConfig = AnalyzerConfig()) -> RankedList:
    """Score all candidates against the query and sort.

    Descending probability, ties by doc id ascending; never drops a
    candidate. The query itself is not a legal candidate.
    """
    candidates = list(candidates)
    if query.id in candidates:
        raise ValueError(f"query paper {query.id} may not appear among its own candidates")
    missing = [cid for cid in candidates if cid not in corpus]
    if missing:
        raise ValueError(f"candidates not in corpus: {missing[:5]}")
    pairs = [assemble_pair(query, corpus[cid], budget, analyzer) for cid in candidates]
    probs = score(model, pairs)
    order = sorted(zip(candidates, probs), key=lambda item: (-item[1], item[0]))
    return RankedList(query_id=query.id, entries=order)
