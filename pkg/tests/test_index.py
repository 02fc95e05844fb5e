import math
import random

import pytest

from citenav.analysis import AnalyzerConfig
from citenav.index import InvertedIndex, bm25_search, build_index
from conftest import PLAIN, make_corpus, random_corpus
from oracles import brute_bm25


@pytest.fixture
def two_doc_index():
    corpus = make_corpus([("d1", "a b b"), ("d2", "a c")])
    return corpus, build_index(corpus, PLAIN)


class TestBuild:
    def test_postings_and_statistics(self, two_doc_index):
        _, index = two_doc_index
        assert index.postings == {"a": [("d1", 1), ("d2", 1)],
                                  "b": [("d1", 2)],
                                  "c": [("d2", 1)]}
        assert index.N == 2
        assert index.avgdl == 2.5

    def test_tf_sums_match_doc_lengths(self):
        rng = random.Random(11)
        corpus, _ = random_corpus(rng, max_docs=40)
        index = build_index(corpus, PLAIN)
        totals = {}
        for plist in index.postings.values():
            for doc_id, tf in plist:
                totals[doc_id] = totals.get(doc_id, 0) + tf
        assert totals == {d: n for d, n in index.doc_lengths.items() if n > 0}

    def test_postings_sorted_by_doc_id(self):
        rng = random.Random(12)
        corpus, _ = random_corpus(rng, max_docs=60)
        index = build_index(corpus, PLAIN)
        for plist in index.postings.values():
            ids = [d for d, _ in plist]
            assert ids == sorted(ids)

    def test_single_doc_avgdl(self):
        corpus = make_corpus([("only", "x y z")])
        index = build_index(corpus, PLAIN)
        assert index.avgdl == 3.0

    def test_rebuild_identical(self, tmp_path):
        corpus = make_corpus([("d1", "alpha beta"), ("d2", "beta gamma gamma")])
        a, b = build_index(corpus, PLAIN), build_index(corpus, PLAIN)
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        a.save(pa)
        b.save(pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_empty_corpus_rejected(self):
        from citenav.corpus import Corpus
        with pytest.raises(ValueError):
            build_index(Corpus({}), PLAIN)


class TestSearch:
    def test_worked_example(self, two_doc_index):
        _, index = two_doc_index
        result = bm25_search(index, "b", 10)
        assert result.ids() == ["d1"]
        # idf = ln 2, tf part = 3.8 / 2.972
        expected = math.log(2.0) * (2 * 1.9) / (2 + 0.9 * (0.6 + 0.4 * 3 / 2.5))
        assert result.entries[0][1] == pytest.approx(expected, abs=1e-12)
        assert result.entries[0][1] == pytest.approx(0.8862, abs=1e-4)

    def test_unknown_terms_empty(self, two_doc_index):
        _, index = two_doc_index
        assert bm25_search(index, "zzz qqq", 10).entries == []

    def test_exclude_self(self, two_doc_index):
        corpus, index = two_doc_index
        result = bm25_search(index, corpus["d1"].text(), 10, exclude="d1")
        assert "d1" not in result.ids()

    def test_k_validation(self, two_doc_index):
        _, index = two_doc_index
        with pytest.raises(ValueError):
            bm25_search(index, "a", 0)

    def test_idf_nonnegative_for_all_df(self):
        rng = random.Random(13)
        corpus, _ = random_corpus(rng, max_docs=80)
        index = build_index(corpus, PLAIN)
        for term in index.postings:
            assert index.idf(term) >= 0.0

    def test_prefix_consistency(self):
        rng = random.Random(14)
        corpus, vocab = random_corpus(rng, max_docs=100)
        index = build_index(corpus, PLAIN)
        query = " ".join(rng.choice(vocab) for _ in range(4))
        full = bm25_search(index, query, 1000).entries
        for k in (1, 3, 10, 50):
            assert bm25_search(index, query, k).entries == full[:k]

    def test_matches_brute_force(self):
        rng = random.Random(15)
        for _ in range(5):
            corpus, vocab = random_corpus(rng, max_docs=120)
            index = build_index(corpus, PLAIN)
            texts = {pid: p.text() for pid, p in corpus.papers.items()}
            query = " ".join(rng.choice(vocab) for _ in range(5))
            expected = brute_bm25(texts, query, PLAIN)
            got = bm25_search(index, query, len(corpus)).entries
            assert [d for d, _ in got] == [d for d, _ in expected]
            for (_, s1), (_, s2) in zip(got, expected):
                assert s1 == pytest.approx(s2, abs=1e-9)

    def test_unrelated_doc_shifts_scores_via_stats_only(self):
        base = [("d1", "a b b"), ("d2", "a c")]
        grown = base + [("d3", "q r s t u v")]
        index = build_index(make_corpus(grown), PLAIN)
        expected = brute_bm25({pid: text for pid, text in grown}, "a b", PLAIN)
        got = bm25_search(index, "a b", 10).entries
        assert [d for d, _ in got] == [d for d, _ in expected]
        for (_, s1), (_, s2) in zip(got, expected):
            assert s1 == pytest.approx(s2, abs=1e-12)

    def test_score_doc_agrees_with_search(self, two_doc_index):
        _, index = two_doc_index
        entries = dict(bm25_search(index, "a b", 10).entries)
        for doc_id, score in entries.items():
            assert index.score_doc(["a", "b"], doc_id) == pytest.approx(score, abs=1e-12)
        assert index.score_doc(["a"], "ghost") == 0.0


class TestPersistence:
    def test_round_trip_reproduces_search(self, tmp_path):
        rng = random.Random(16)
        corpus, vocab = random_corpus(rng, max_docs=60)
        index = build_index(corpus, PLAIN)
        path = tmp_path / "index.json"
        index.save(path)
        loaded = InvertedIndex.load(path)
        query = " ".join(rng.choice(vocab) for _ in range(4))
        assert bm25_search(index, query, 50).entries == bm25_search(loaded, query, 50).entries
        assert loaded.fingerprint == index.fingerprint

    def test_fingerprint_mismatch_rejected(self, tmp_path):
        corpus = make_corpus([("d1", "a b"), ("d2", "c")])
        index = build_index(corpus, PLAIN)
        path = tmp_path / "index.json"
        index.save(path)
        with pytest.raises(ValueError, match="fingerprint"):
            InvertedIndex.load(path, expected_analyzer=AnalyzerConfig())

    def test_unrecognized_artifact_rejected(self, tmp_path):
        path = tmp_path / "bogus.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            InvertedIndex.load(path)
