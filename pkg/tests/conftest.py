import random

import pytest

from citenav.analysis import AnalyzerConfig
from citenav.corpus import Corpus, Paper

# raw tokens: no stopword/stem interference when tests hand-build vocab
PLAIN = AnalyzerConfig(lowercase=True, remove_stopwords=False, stem=False)


def make_corpus(entries):
    """entries: (id, text) or (id, text, year, citations) tuples."""
    papers = {}
    for entry in entries:
        pid, text = entry[0], entry[1]
        year = entry[2] if len(entry) > 2 else 2000
        citations = list(entry[3]) if len(entry) > 3 else []
        papers[pid] = Paper(id=pid, title=text, abstract="", year=year,
                            out_citations=citations)
    return Corpus(papers)


def random_corpus(rng: random.Random, max_docs=200, vocab_size=50, min_docs=2):
    n_docs = rng.randint(min_docs, max_docs)
    vocab = [f"w{v}" for v in range(rng.randint(2, vocab_size))]
    entries = []
    for d in range(n_docs):
        length = rng.randint(1, 30)
        entries.append((f"d{d:04d}", " ".join(rng.choice(vocab) for _ in range(length))))
    return make_corpus(entries), vocab


@pytest.fixture(scope="session")
def planted_instance():
    from planted import build_planted
    return build_planted()
