import pytest

from citenav.corpus import Corpus, Paper, Query, QuerySet
from citenav.errors import PipelineStageError
from citenav.index import bm25_search, build_index
from citenav.pipeline import (PipelineConfig, build_query_text,
                              generate_training_pairs, run_pipeline,
                              run_queries, sweep_budgets)
from citenav.rerank import IdentityScorer, TokenBudget
from conftest import PLAIN, make_corpus
from oracles import brute_recall_at_k


@pytest.fixture(scope="module")
def small_world():
    corpus = make_corpus([
        ("hub", "alpha beta gamma delta", 2005, ["hid1", "hid2"]),
        ("vis1", "alpha beta noise1", 2000, ["vis2"]),
        ("vis2", "alpha gamma noise2", 2000, ["vis1"]),
        ("hid1", "zz1 zz2 zz3", 2000, ["hid2"]),
        ("hid2", "zz4 zz5 zz6", 2000, ["hid1"]),
        ("junk1", "noise1 noise3", 2000, ["vis1"]),
        ("junk2", "noise2 noise4", 2000, ["vis2"]),
    ])
    index = build_index(corpus, PLAIN)
    query = Paper("q", "alpha beta", "gamma", 2010,
                  ["vis1", "vis2", "hid1", "hid2"])
    return corpus, index, query


class TestQueryText:
    def test_title_and_concatenation(self):
        paper = Paper("p", "The Title", "And the abstract.", 2000)
        assert build_query_text(paper, "title") == "The Title"
        assert build_query_text(paper, "title_and_abstract") == "The Title And the abstract."

    def test_key_terms_rank_by_tf_idf(self, small_world):
        corpus, index, _ = small_world
        paper = Paper("p", "zz1 zz1 alpha", "", 2000)
        # zz1 appears once in the corpus (high idf) and twice here
        terms = build_query_text(paper, "key_terms", index).split()
        assert terms[0] == "zz1"
        assert set(terms) == {"zz1", "alpha"}

    def test_key_terms_constant_idf_falls_back_to_tf(self):
        corpus = make_corpus([("d1", "a b"), ("d2", "a b")])
        index = build_index(corpus, PLAIN)
        paper = Paper("p", "b b b a", "", 2000)
        assert build_query_text(paper, "key_terms", index).split() == ["b", "a"]

    def test_key_terms_cap_and_index_requirement(self, small_world):
        _, index, _ = small_world
        text = " ".join(f"t{i}" for i in range(40))
        paper = Paper("p", text, "", 2000)
        assert len(build_query_text(paper, "key_terms", index).split()) == 16
        with pytest.raises(ValueError):
            build_query_text(paper, "key_terms", None)


class TestRunPipeline:
    def test_t0_identity_equals_bm25(self, small_world):
        corpus, index, query = small_world
        config = PipelineConfig(iterations=0, initial_depth=1000)
        result = run_pipeline(query, config, index, corpus, IdentityScorer())
        baseline = bm25_search(index, query.text(), 1000, exclude=query.id,
                               query_id=query.id)
        assert result == baseline

    def test_t0_with_scorer_reranks_whole_list(self, small_world):
        corpus, index, query = small_world

        class Reverse:
            preserves_order = False

            def score_pairs(self, pairs):
                n = len(pairs)
                return [(i + 1) / n for i in range(n)]

        config = PipelineConfig(iterations=0, initial_depth=1000)
        base = run_pipeline(query, config, index, corpus, IdentityScorer())
        flipped = run_pipeline(query, config, index, corpus, Reverse())
        assert sorted(flipped.ids()) == sorted(base.ids())
        assert flipped.ids() == base.ids()[::-1]

    def test_navigation_pulls_cited_docs_in(self, small_world):
        corpus, index, query = small_world
        config = PipelineConfig(iterations=1, budgets=[(3, 5)], initial_depth=1000)
        result = run_pipeline(query, config, index, corpus, IdentityScorer())
        assert "hid1" in result.ids() and "hid2" in result.ids()
        t0 = run_pipeline(query, PipelineConfig(iterations=0), index, corpus,
                          IdentityScorer())
        assert "hid1" not in t0.ids()

    def test_pool_respects_budget_sum(self, small_world):
        corpus, index, query = small_world
        config = PipelineConfig(iterations=1, budgets=[(2, 1)])
        result = run_pipeline(query, config, index, corpus, IdentityScorer())
        assert len(result) <= 3

    def test_stage_errors_carry_iteration(self, small_world):
        corpus, index, query = small_world

        class Broken:
            preserves_order = False

            def score_pairs(self, pairs):
                raise RuntimeError("boom")

        config = PipelineConfig(iterations=2, budgets=[(3, 2), (3, 2)])
        with pytest.raises(PipelineStageError) as err:
            run_pipeline(query, config, index, corpus, Broken())
        assert err.value.iteration == 0 and err.value.stage == "ranking"

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PipelineConfig(iterations=2, budgets=[(1, 1)]).validate()
        with pytest.raises(ValueError):
            PipelineConfig(query_type="nope").validate()
        with pytest.raises(ValueError):
            PipelineConfig(initial_depth=0).validate()
        with pytest.raises(ValueError):
            PipelineConfig(budgets=[], iterations=0, tie_break="random").validate()

    def test_fingerprint_tracks_config(self):
        a = PipelineConfig(iterations=1, budgets=[(300, 700)])
        b = PipelineConfig(iterations=1, budgets=[(300, 700)])
        c = PipelineConfig(iterations=1, budgets=[(400, 600)])
        assert a.fingerprint() == b.fingerprint() != c.fingerprint()

    def test_run_queries_collects_by_id(self, small_world):
        corpus, index, query = small_world
        queries = QuerySet([Query(paper=query, relevant=frozenset(query.out_citations))])
        result = run_queries(queries, PipelineConfig(), index, corpus, IdentityScorer())
        assert set(result.rankings) == {"q"}
        assert result.fingerprint


class TestTrainingPairs:
    def _queries(self, corpus):
        query = Paper("q", "alpha beta gamma", "", 2010, ["vis1", "vis2"])
        return QuerySet([Query(paper=query, relevant=frozenset({"vis1", "vis2", "hid1"}))])

    def test_labels_follow_gold(self, small_world):
        corpus, index, _ = small_world
        pairs, stats = generate_training_pairs(self._queries(corpus), index, corpus,
                                               top_k=4)
        # only three docs share any query term, so top-4 returns three
        assert stats.total == len(pairs) == 3
        for p in pairs:
            assert p.relevant == (p.candidate_id in {"vis1", "vis2", "hid1"})
        assert [p.rank for p in pairs] == [1, 2, 3]
        assert stats.positives == sum(p.relevant for p in pairs)

    def test_add_missed_positives(self, small_world):
        corpus, index, _ = small_world
        base, _ = generate_training_pairs(self._queries(corpus), index, corpus, top_k=4)
        retrieved_gold = {p.candidate_id for p in base if p.relevant}
        extended, _ = generate_training_pairs(self._queries(corpus), index, corpus,
                                              top_k=4, sampling_mode="add_missed_positives")
        appended = [p for p in extended if p.rank == 0]
        assert {p.candidate_id for p in appended} == {"vis1", "vis2", "hid1"} - retrieved_gold
        assert all(p.relevant for p in appended)

    def test_add_random_negatives_deterministic(self, small_world):
        corpus, index, _ = small_world
        a, _ = generate_training_pairs(self._queries(corpus), index, corpus, top_k=3,
                                       sampling_mode="add_random_negatives", seed=5)
        b, _ = generate_training_pairs(self._queries(corpus), index, corpus, top_k=3,
                                       sampling_mode="add_random_negatives", seed=5)
        assert [p.candidate_id for p in a] == [p.candidate_id for p in b]
        appended = [p for p in a if p.rank == 0]
        assert appended and not any(p.relevant for p in appended)
        assert all(p.candidate_id not in {"vis1", "vis2", "hid1", "q"} for p in appended)

    def test_relabel_consistency(self, small_world):
        corpus, index, _ = small_world
        queries = self._queries(corpus)
        pairs, _ = generate_training_pairs(queries, index, corpus, top_k=5)
        gold = queries.queries[0].relevant
        for p in pairs:
            assert p.relevant == (p.candidate_id in gold)

    def test_bad_mode_rejected(self, small_world):
        corpus, index, _ = small_world
        with pytest.raises(ValueError):
            generate_training_pairs(self._queries(corpus), index, corpus,
                                    sampling_mode="everything")


class TestSweep:
    def test_all_tied_returns_largest_kd(self):
        # no citations in the corpus: every grid point scores the same
        corpus = make_corpus([
            ("d1", "alpha beta", 2000, []),
            ("d2", "alpha gamma", 2000, []),
            ("d3", "noise", 2000, []),
        ])
        index = build_index(corpus, PLAIN)
        queries = QuerySet([Query(paper=Paper("q", "alpha", "", 2010, ["d1"]),
                                  relevant=frozenset({"d1"}))])
        result = sweep_budgets(queries, index, corpus, IdentityScorer(),
                               grid_step=50, budget_sum=100)
        assert result.best == (100, 0)
        assert len(result.curve) == 3

    def test_argmax_matches_exhaustive_evaluation(self, small_world):
        corpus, index, query = small_world
        queries = QuerySet([Query(paper=query, relevant=frozenset(query.out_citations))])
        result = sweep_budgets(queries, index, corpus, IdentityScorer(),
                               grid_step=2, budget_sum=4, initial_depth=10)
        # brute force over the same grid, straight from pipeline runs
        best, best_val = None, -1.0
        for k_d in (0, 2, 4):
            config = PipelineConfig(iterations=1, budgets=[(k_d, 4 - k_d)],
                                    initial_depth=10)
            ranked = run_pipeline(query, config, index, corpus, IdentityScorer())
            val = brute_recall_at_k(ranked.ids(), query.out_citations)
            if val >= best_val:
                best, best_val = (k_d, 4 - k_d), val
        assert result.best == best
        assert result.curve[-1].k_d == 4

    def test_grid_size(self, small_world):
        corpus, index, query = small_world
        queries = QuerySet([Query(paper=query, relevant=frozenset(query.out_citations))])
        result = sweep_budgets(queries, index, corpus, IdentityScorer(),
                               grid_step=100, budget_sum=1000, initial_depth=10)
        assert len(result.curve) == 11
        assert [p.k_d for p in result.curve] == list(range(0, 1001, 100))

    def test_empty_dev_set_rejected(self, small_world):
        corpus, index, _ = small_world
        with pytest.raises(ValueError):
            sweep_budgets(QuerySet([]), index, corpus, IdentityScorer())


class TestPlanted:
    def test_navigation_lifts_recall(self, planted_instance):
        corpus, queries = planted_instance
        assert len(corpus) == 2000
        index = build_index(corpus, PLAIN)
        scorer = IdentityScorer()
        t0 = PipelineConfig(iterations=0, initial_depth=1000)
        t1 = PipelineConfig(iterations=1, budgets=[(300, 700)], initial_depth=1000)
        gains = []
        sample = queries.queries[:20]
        for q in sample:
            base = run_pipeline(q.paper, t0, index, corpus, scorer)
            nav = run_pipeline(q.paper, t1, index, corpus, scorer)
            assert len(nav) <= 1000
            gains.append(brute_recall_at_k(nav.ids(), q.relevant)
                         - brute_recall_at_k(base.ids(), q.relevant))
        assert sum(gains) / len(gains) >= 0.2

    def test_filtering_is_noop_on_planted(self, planted_instance):
        from citenav.corpus import filter_corpus
        corpus, _ = planted_instance
        assert filter_corpus(corpus) == corpus
