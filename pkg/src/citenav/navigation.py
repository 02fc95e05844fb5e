"""Citation-graph navigation: expand a ranked list with cited papers.

The top k_d entries of the input list are retained; their citations are
gathered rank-by-rank (best-ranked source first, citations in stored
order) and capped at k_c by keeping the earliest-gathered survivors —
which is exactly "discard the citations of the lowest-ranked retained
papers first", with a partial trim at the boundary paper.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Corpus
from .index import RankedList


@dataclass
class CandidatePool:
    retained: list[str]
    expanded: list[str]
    # expanded id -> (source id, 1-based rank of source within retained)
    provenance: dict[str, tuple[str, int]] = field(default_factory=dict)


def navigate(ranked: RankedList, corpus: Corpus, k_d: int, k_c: int,
             query_id: str, max_year: int | None = None) -> CandidatePool:
    """Build the candidate pool for one iteration.

    A gathered citation is skipped if it is the query itself, already
    retained, already gathered, missing from the corpus, or (when
    max_year is set) published after max_year. k_d = 0 degenerates to an
    empty pool, which the budget sweep's grid needs to evaluate.
    """
    if k_d < 0 or k_c < 0:
        raise ValueError("budgets must be non-negative")
    retained = [doc_id for doc_id, _ in ranked.top(k_d)]
    retained_set = set(retained)

    expanded: list[str] = []
    expanded_set: set[str] = set()
    provenance: dict[str, tuple[str, int]] = {}
    if k_c > 0:
        for rank, source_id in enumerate(retained, start=1):
            source = corpus.get(source_id)
            if source is None:
                continue
            for cited in source.out_citations:
                if cited == query_id or cited in retained_set or cited in expanded_set:
                    continue
                target = corpus.get(cited)
                if target is None:
                    continue
                if max_year is not None and target.year is not None and target.year > max_year:
                    continue
                expanded.append(cited)
                expanded_set.add(cited)
                provenance[cited] = (source_id, rank)
        if len(expanded) > k_c:
            for dropped in expanded[k_c:]:
                del provenance[dropped]
            expanded = expanded[:k_c]
    return CandidatePool(retained=retained, expanded=expanded, provenance=provenance)


def pool_to_candidates(pool: CandidatePool) -> list[str]:
    """Retained then expanded; provisional order, re-ranking reorders."""
    return pool.retained + pool.expanded
