import json
import random

import pytest

from citenav.corpus import (Corpus, Paper, SplitSpec, corpus_stats, filter_corpus,
                            ingest_corpus, split_by_year, write_corpus)
from citenav.errors import IngestError, SplitError


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as out:
        for r in records:
            out.write(json.dumps(r) + "\n")


def _record(pid, title="t", abstract="a", year=2000, citations=()):
    return {"id": pid, "title": title, "paperAbstract": abstract,
            "year": year, "outCitations": list(citations)}


class TestIngest:
    def test_three_valid_records(self, tmp_path):
        path = tmp_path / "papers.jsonl"
        _write_jsonl(path, [_record("p1"), _record("p2"), _record("p3")])
        corpus, skipped = ingest_corpus(path)
        assert len(corpus) == 3 and skipped == 0

    def test_missing_year_kept_until_filter(self, tmp_path):
        path = tmp_path / "papers.jsonl"
        _write_jsonl(path, [{"id": "p1", "title": "t", "paperAbstract": "",
                             "outCitations": ["p2"]},
                            _record("p2", citations=["p2x"]),
                            _record("p2x", citations=["p2"])])
        corpus, skipped = ingest_corpus(path)
        assert skipped == 0
        assert corpus["p1"].year is None
        assert "p1" not in filter_corpus(corpus)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "papers.jsonl"
        path.write_text("")
        corpus, skipped = ingest_corpus(path)
        assert len(corpus) == 0 and skipped == 0

    def test_malformed_and_incomplete_lines_counted(self, tmp_path):
        path = tmp_path / "papers.jsonl"
        path.write_text(
            json.dumps(_record("ok")) + "\n"
            + "{broken json\n"
            + json.dumps({"title": "no id"}) + "\n"
            + json.dumps({"id": "no-title"}) + "\n")
        corpus, skipped = ingest_corpus(path)
        assert len(corpus) == 1 and skipped == 3

    def test_duplicate_id_is_a_skip(self, tmp_path):
        path = tmp_path / "papers.jsonl"
        _write_jsonl(path, [_record("p1", title="first"), _record("p1", title="second")])
        corpus, skipped = ingest_corpus(path)
        assert len(corpus) == 1 and skipped == 1
        assert corpus["p1"].title == "first"

    def test_unreadable_path(self, tmp_path):
        with pytest.raises(IngestError):
            ingest_corpus(tmp_path / "nope.jsonl")

    def test_round_trip_is_lossless(self, tmp_path):
        original = Corpus({
            "a": Paper("a", "Títle ünicode", "abs", 2001, ["b", "c"]),
            "b": Paper("b", "second", "", 1999, ["a"]),
            "c": Paper("c", "third", "x", 2000, []),
        })
        path = tmp_path / "round.jsonl"
        write_corpus(original, path)
        reloaded, skipped = ingest_corpus(path)
        assert skipped == 0 and reloaded == original

    def test_rewrite_is_byte_identical(self, tmp_path):
        corpus = Corpus({"b": Paper("b", "two", "", 1999, ["a"]),
                         "a": Paper("a", "one", "x", 2001, [])})
        p1, p2 = tmp_path / "one.jsonl", tmp_path / "two.jsonl"
        write_corpus(corpus, p1)
        write_corpus(corpus, p2)
        assert p1.read_bytes() == p2.read_bytes()


def _paper(pid, year, citations):
    return Paper(pid, f"title {pid}", "", year, list(citations))


class TestFilter:
    def test_future_edge_then_empty_paper(self):
        # stable anchor pair keeps the corpus from emptying entirely
        corpus = Corpus({
            "p": _paper("p", 2000, ["q"]), "q": _paper("q", 2000, ["p"]),
            "a": _paper("a", 2015, ["b"]), "b": _paper("b", 2016, ["p"]),
        })
        out = filter_corpus(corpus)
        assert set(out.papers) == {"p", "q", "b"}

    def test_citation_outside_corpus_drops_paper(self):
        corpus = Corpus({
            "p": _paper("p", 2000, ["q"]), "q": _paper("q", 2000, ["p"]),
            "a": _paper("a", 2015, ["missing"]),
        })
        out = filter_corpus(corpus)
        assert set(out.papers) == {"p", "q"}

    def test_chain_collapses_to_empty(self):
        corpus = Corpus({
            "a": _paper("a", 2016, ["b"]),
            "b": _paper("b", 2015, ["c"]),
            "c": Paper("c", "no year", "", None, ["b"]),
        })
        assert len(filter_corpus(corpus)) == 0

    def test_self_citation_removed(self):
        corpus = Corpus({
            "p": _paper("p", 2000, ["p", "q"]), "q": _paper("q", 2000, ["p"]),
        })
        out = filter_corpus(corpus)
        assert out["p"].out_citations == ["q"]

    def test_same_year_citations_kept(self):
        corpus = Corpus({"p": _paper("p", 2000, ["q"]), "q": _paper("q", 2000, ["p"])})
        out = filter_corpus(corpus)
        assert out["p"].out_citations == ["q"]

    def _random_corpus(self, rng):
        n = rng.randint(0, 30)
        papers = {}
        ids = [f"r{i}" for i in range(n)]
        for pid in ids:
            year = rng.choice([None, 1998, 1999, 2000, 2001])
            cites = rng.sample(ids + ["ghost1", "ghost2"],
                               rng.randint(0, min(4, n)))
            papers[pid] = Paper(pid, pid, "", year, cites)
        return Corpus(papers)

    def test_idempotent_on_random_corpora(self):
        rng = random.Random(7)
        for _ in range(50):
            corpus = self._random_corpus(rng)
            once = filter_corpus(corpus)
            twice = filter_corpus(once)
            assert once == twice

    def test_post_conditions_on_random_corpora(self):
        rng = random.Random(8)
        for _ in range(50):
            out = filter_corpus(self._random_corpus(rng))
            for pid, paper in out.papers.items():
                assert paper.year is not None
                assert paper.out_citations, "papers without citations must be dropped"
                for cited in paper.out_citations:
                    assert cited in out.papers
                    assert cited != pid
                    assert out[cited].year <= paper.year


class TestSplit:
    def _ten_papers(self):
        papers = {}
        for i, year in enumerate(range(2001, 2011)):
            pid = f"p{i}"
            papers[pid] = _paper(pid, year, [f"p{j}" for j in range(max(0, i - 1), i)] or ["p1"])
        return Corpus(papers)

    def test_eighty_ten_ten(self):
        train, dev, test = split_by_year(self._ten_papers(), SplitSpec())
        assert sorted(p.year for p in train.papers.values()) == list(range(2001, 2009))
        assert [q.paper.year for q in dev] == [2009]
        assert [q.paper.year for q in test] == [2010]

    def test_boundary_tie_broken_by_id(self):
        papers = {pid: _paper(pid, 2000, ["anchor"]) for pid in
                  ["a", "b", "c", "d", "e", "f", "g", "h", "i"]}
        papers["anchor"] = _paper("anchor", 1999, ["a"])
        train, dev, test = split_by_year(Corpus(papers), SplitSpec())
        # 10 papers: first 8 by (year, id) train, then "h" dev, "i" test
        assert [q.id for q in dev] == ["h"]
        assert [q.id for q in test] == ["i"]

    def test_partition_and_order(self):
        corpus = self._ten_papers()
        train, dev, test = split_by_year(corpus, SplitSpec())
        ids = set(train.papers) | {q.id for q in dev} | {q.id for q in test}
        assert ids == set(corpus.papers)
        assert len(train.papers) + len(dev) + len(test) == len(corpus)
        max_train = max(p.year for p in train.papers.values())
        assert max_train <= min(q.paper.year for q in dev)

    def test_sampling_reproducible(self):
        papers = {f"p{i}": _paper(f"p{i}", 2000 + i // 10, ["p0"]) for i in range(100)}
        papers["p0"] = _paper("p0", 1990, ["p1"])
        corpus = Corpus(papers)
        spec = SplitSpec(dev_sample_size=5, test_sample_size=5, sample_seed=42)
        _, dev1, test1 = split_by_year(corpus, spec)
        _, dev2, test2 = split_by_year(corpus, spec)
        assert [q.id for q in dev1] == [q.id for q in dev2]
        assert [q.id for q in test1] == [q.id for q in test2]
        assert len(dev1) == 5 and len(test1) == 5
        _, dev3, _ = split_by_year(corpus, SplitSpec(dev_sample_size=5,
                                                     test_sample_size=5, sample_seed=43))
        assert [q.id for q in dev3] != [q.id for q in dev1]

    def test_relevant_sets_resolve_in_corpus(self):
        papers = {"p0": _paper("p0", 2001, ["p1"]), "p1": _paper("p1", 2001, ["p0"])}
        for i in range(2, 10):
            papers[f"p{i}"] = _paper(f"p{i}", 2000 + i, ["p0", "p1"])
        corpus = filter_corpus(Corpus(papers))
        assert len(corpus) == 10
        train, dev, test = split_by_year(corpus, SplitSpec())
        for q in list(dev) + list(test):
            assert q.relevant
            assert all(r in corpus for r in q.relevant)

    def test_too_small(self):
        with pytest.raises(SplitError):
            split_by_year(Corpus({"a": _paper("a", 2000, ["a"])}), SplitSpec())

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            split_by_year(self._ten_papers(),
                          SplitSpec(train_fraction=0.5, dev_fraction=0.1, test_fraction=0.1))


class TestStats:
    def test_average(self):
        corpus = Corpus({"a": _paper("a", 2000, ["x", "y", "z"]),
                         "b": _paper("b", 2000, ["x"])})
        stats = corpus_stats(corpus)
        assert stats.total_docs == 2
        assert stats.total_citations == 4
        assert stats.avg_citations_per_doc == 2.0

    def test_empty(self):
        stats = corpus_stats(Corpus({}))
        assert stats.total_docs == 0 and stats.avg_citations_per_doc == 0.0

    def test_char_length_uses_title_and_abstract(self):
        corpus = Corpus({"a": Paper("a", "12345", "1234", 2000, ["a1"])})
        # "12345 1234" -> 10 chars
        assert corpus_stats(corpus).avg_doc_length_chars == 10.0
