"""Corpus ingestion, filtering, chronological splits, and statistics.

The on-disk format is UTF-8 line-delimited JSON with fields
``id``, ``title``, ``paperAbstract``, ``year``, ``outCitations`` —
the Open Research dump schema, so the real dataset loads unmodified.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IngestError, SplitError


@dataclass
class Paper:
    id: str
    title: str
    abstract: str = ""
    year: int | None = None
    # semantically a set (no duplicates) but kept in stored order, which
    # fixes the gather order used by citation-graph navigation
    out_citations: list[str] = field(default_factory=list)

    def text(self) -> str:
        """Title and abstract as one retrieval unit."""
        return f"{self.title} {self.abstract}" if self.abstract else self.title


class Corpus:
    """Immutable-by-convention id-keyed collection of papers."""

    def __init__(self, papers: dict[str, Paper]):
        self.papers = papers

    def __len__(self):
        return len(self.papers)

    def __contains__(self, paper_id):
        return paper_id in self.papers

    def __getitem__(self, paper_id) -> Paper:
        return self.papers[paper_id]

    def get(self, paper_id) -> Paper | None:
        return self.papers.get(paper_id)

    def ids(self) -> list[str]:
        return sorted(self.papers)

    def adjacency(self) -> dict[str, list[str]]:
        """Citation adjacency: id -> cited ids, exactly the stored edges."""
        return {pid: list(p.out_citations) for pid, p in self.papers.items()}

    def edge_count(self) -> int:
        return sum(len(p.out_citations) for p in self.papers.values())

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.papers == other.papers


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    dev_fraction: float = 0.1
    test_fraction: float = 0.1
    dev_sample_size: int | None = None
    test_sample_size: int | None = None
    sample_seed: int = 0

    def validate(self):
        fracs = (self.train_fraction, self.dev_fraction, self.test_fraction)
        if any(f <= 0 for f in fracs):
            raise ValueError("split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        for size in (self.dev_sample_size, self.test_sample_size):
            if size is not None and size < 1:
                raise ValueError("sample sizes must be positive")


@dataclass
class Query:
    """One evaluation query: a paper plus its gold citation set."""

    paper: Paper
    relevant: frozenset[str]

    @property
    def id(self) -> str:
        return self.paper.id


@dataclass
class QuerySet:
    queries: list[Query]

    def __len__(self):
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    def qrels(self) -> dict[str, frozenset[str]]:
        return {q.id: q.relevant for q in self.queries}


@dataclass
class StatsReport:
    total_docs: int
    total_citations: int
    avg_citations_per_doc: float
    avg_doc_length_chars: float

    def as_table(self) -> str:
        rows = [
            ("Total # of docs", f"{self.total_docs:,}"),
            ("Total # of citations", f"{self.total_citations:,}"),
            ("Avg. # citations per doc", f"{self.avg_citations_per_doc:.2f}"),
            ("Avg. len. per doc (char)", f"{self.avg_doc_length_chars:.0f}"),
        ]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def _parse_record(obj: dict) -> Paper | None:
    pid = obj.get("id")
    title = obj.get("title")
    if not pid or not isinstance(pid, str) or title is None or not isinstance(title, str):
        return None
    year = obj.get("year")
    if not isinstance(year, int):
        year = None
    raw_citations = obj.get("outCitations") or []
    seen = set()
    citations = []
    for cid in raw_citations:
        if isinstance(cid, str) and cid and cid not in seen:
            seen.add(cid)
            citations.append(cid)
    abstract = obj.get("paperAbstract")
    if not isinstance(abstract, str):
        abstract = ""
    return Paper(id=pid, title=title, abstract=abstract, year=year, out_citations=citations)


def ingest_corpus(path: str | Path) -> tuple[Corpus, int]:
    """Load a line-delimited corpus file.

    Returns the corpus plus the number of skipped records. Malformed
    lines and records missing id or title are skipped, never fatal;
    an unreadable path is.
    """
    path = Path(path)
    try:
        handle = path.open("r", encoding="utf-8")
    except OSError as e:
        raise IngestError(f"cannot read corpus file {path}: {e}") from e
    papers: dict[str, Paper] = {}
    skipped = 0
    with handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                skipped += 1
                continue
            paper = _parse_record(obj) if isinstance(obj, dict) else None
            if paper is None or paper.id in papers:
                skipped += 1
                continue
            papers[paper.id] = paper
    return Corpus(papers), skipped


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Serialize a corpus back to the line-delimited schema.

    Records are written sorted by id so a rerun produces identical bytes.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as out:
        for pid in sorted(corpus.papers):
            p = corpus.papers[pid]
            record = {
                "id": p.id,
                "title": p.title,
                "paperAbstract": p.abstract,
                "year": p.year,
                "outCitations": list(p.out_citations),
            }
            out.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            out.write("\n")


def filter_corpus(corpus: Corpus) -> Corpus:
    """Apply the dataset cleaning rules until nothing more changes.

    Each pass: drop papers without a year; drop citation edges that
    point outside the corpus, at the paper itself, or forward in time
    (cited year greater than citing year); drop papers left with no
    citations. Dropping papers can orphan other papers' edges, hence
    the fixpoint loop. Idempotent.
    """
    papers = {pid: Paper(p.id, p.title, p.abstract, p.year, list(p.out_citations))
              for pid, p in corpus.papers.items()}
    changed = True
    while changed:
        changed = False
        for pid in [pid for pid, p in papers.items() if p.year is None]:
            del papers[pid]
            changed = True
        for p in papers.values():
            kept = [
                cid for cid in p.out_citations
                if cid in papers and cid != p.id and papers[cid].year <= p.year
            ]
            if len(kept) != len(p.out_citations):
                p.out_citations = kept
                changed = True
        for pid in [pid for pid, p in papers.items() if not p.out_citations]:
            del papers[pid]
            changed = True
    return Corpus(papers)


def _queries_for(papers: list[Paper], corpus: Corpus) -> list[Query]:
    out = []
    for p in papers:
        relevant = frozenset(c for c in p.out_citations if c in corpus and c != p.id)
        out.append(Query(paper=p, relevant=relevant))
    return out


def split_by_year(corpus: Corpus, spec: SplitSpec = SplitSpec()) -> tuple[Corpus, QuerySet, QuerySet]:
    """Chronological train/dev/test split.

    Papers are ordered by (year, id); the oldest train_fraction go to
    train, the next dev_fraction form the dev query pool, the rest the
    test pool. Dev/test pools are optionally down-sampled with
    ``sample_seed``. Query gold sets are the papers' citations resolved
    against the full corpus (queries are retrieved against the full
    index, minus themselves).
    """
    spec.validate()
    if len(corpus) < 3:
        raise SplitError(f"corpus of {len(corpus)} papers is too small to split")
    if any(p.year is None for p in corpus.papers.values()):
        raise SplitError("split requires every paper to have a year; filter first")
    ordered = sorted(corpus.papers.values(), key=lambda p: (p.year, p.id))
    n = len(ordered)
    # epsilon guards against 10 * 0.8 style float landing just under the integer
    train_end = int(n * spec.train_fraction + 1e-9)
    dev_end = int(n * (spec.train_fraction + spec.dev_fraction) + 1e-9)
    train = Corpus({p.id: p for p in ordered[:train_end]})
    dev_pool = ordered[train_end:dev_end]
    test_pool = ordered[dev_end:]

    rng = random.Random(spec.sample_seed)
    if spec.dev_sample_size is not None and spec.dev_sample_size < len(dev_pool):
        dev_pool = sorted(rng.sample(dev_pool, spec.dev_sample_size),
                          key=lambda p: (p.year, p.id))
    if spec.test_sample_size is not None and spec.test_sample_size < len(test_pool):
        test_pool = sorted(rng.sample(test_pool, spec.test_sample_size),
                           key=lambda p: (p.year, p.id))
    return train, QuerySet(_queries_for(dev_pool, corpus)), QuerySet(_queries_for(test_pool, corpus))


def queryset_from_corpus(subset: Corpus, full: Corpus) -> QuerySet:
    """Treat every paper of ``subset`` as a query against ``full``."""
    ordered = sorted(subset.papers.values(), key=lambda p: (p.year or 0, p.id))
    return QuerySet(_queries_for(ordered, full))


def corpus_stats(corpus: Corpus) -> StatsReport:
    n = len(corpus)
    edges = corpus.edge_count()
    if n == 0:
        return StatsReport(0, 0, 0.0, 0.0)
    chars = sum(len(p.text()) for p in corpus.papers.values())
    return StatsReport(
        total_docs=n,
        total_citations=edges,
        avg_citations_per_doc=edges / n,
        avg_doc_length_chars=chars / n,
    )
