"""Cross-dataset leakage removal via single-word-shingle title Jaccard.

Training documents whose title is near-identical to a holdout title are
dropped, then the corpus is re-filtered because removals can orphan
citations. The shared-word blocking index returns exactly the
brute-force all-pairs result: for threshold > 0 any qualifying pair of
non-empty signatures shares at least one word, and empty-vs-empty is
handled separately.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Corpus, filter_corpus

_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def title_signature(title: str) -> frozenset[str]:
    """Lowercase, replace special characters with spaces, split, dedupe."""
    return frozenset(_NON_ALNUM.sub(" ", title.lower()).split())


def jaccard(a, b) -> float:
    """|a & b| / |a | b|; 1.0 when both empty, 0.0 when exactly one is."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    a, b = set(a), set(b)
    return len(a & b) / len(a | b)


@dataclass
class RemovedDoc:
    train_id: str
    matched_title: str
    similarity: float


def _best_match(sig, holdout_sigs, candidates, threshold):
    best = None
    for idx in candidates:
        sim = jaccard(sig, holdout_sigs[idx])
        if sim >= threshold and (best is None or sim > best[1]):
            best = (idx, sim)
    return best


def remove_leaked(train: Corpus, holdout_titles, threshold: float = 0.7,
                  use_blocking: bool = True) -> tuple[Corpus, list[RemovedDoc]]:
    """Drop train papers whose title matches any holdout title.

    Returns the surviving corpus (re-filtered to fixpoint) and the
    removed documents with their best-matching holdout title. With
    use_blocking=False every train/holdout pair is compared directly;
    the default blocked path must produce identical results.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    holdout_titles = list(holdout_titles)
    holdout_sigs = [title_signature(t) for t in holdout_titles]

    word_to_holdouts: dict[str, list[int]] = {}
    empty_holdouts: list[int] = []
    if use_blocking:
        for idx, sig in enumerate(holdout_sigs):
            if not sig:
                empty_holdouts.append(idx)
            for word in sig:
                word_to_holdouts.setdefault(word, []).append(idx)

    removed: list[RemovedDoc] = []
    removed_ids: set[str] = set()
    for pid in sorted(train.papers):
        sig = title_signature(train.papers[pid].title)
        if use_blocking:
            if sig:
                candidates = sorted({idx for w in sig for idx in word_to_holdouts.get(w, ())})
            else:
                candidates = empty_holdouts
        else:
            candidates = range(len(holdout_sigs))
        best = _best_match(sig, holdout_sigs, candidates, threshold)
        if best is not None:
            idx, sim = best
            removed.append(RemovedDoc(pid, holdout_titles[idx], sim))
            removed_ids.add(pid)

    survivors = Corpus({pid: p for pid, p in train.papers.items() if pid not in removed_ids})
    return filter_corpus(survivors), removed
