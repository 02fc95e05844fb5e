"""Command-line entry point.

Subcommands cover the full workflow: ingest/filter a corpus, build an
index, run the retrieval pipeline, export training pairs, train the
lexical scorer, evaluate runs, sweep citation budgets, and deduplicate
against holdout titles. Every command is deterministic for fixed
inputs, flags, and seed; report paths render figures next to their
delimited outputs.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from . import formats, plotting
from .analysis import AnalyzerConfig
from .corpus import (Corpus, Paper, Query, QuerySet, SplitSpec, corpus_stats,
                     filter_corpus, ingest_corpus, queryset_from_corpus,
                     split_by_year, write_corpus)
from .dedup import remove_leaked
from .errors import CitenavError
from .evaluation import evaluate
from .index import InvertedIndex, build_index
from .pipeline import (PipelineConfig, generate_training_pairs, run_pipeline,
                       sweep_budgets)
from .rerank import (ExternalScorer, IdentityScorer, LexicalScorer,
                     TokenBudget, train_lexical_scorer)
from .wire import connect_stdio, connect_tcp

SCORER_ENV_VAR = "CITENAV_SCORER"


def _require(args, *names):
    """Validate path-ish options after parsing so a config file can
    supply them (explicit flags always win over config values)."""
    for name in names:
        if getattr(args, name, None) in (None, ""):
            flag = "--" + name.replace("_", "-")
            raise CitenavError(f"missing required option {flag}")


def _analyzer_from_args(args) -> AnalyzerConfig:
    return AnalyzerConfig(
        lowercase=not args.no_lowercase,
        remove_stopwords=not args.no_stopwords,
        stem=not args.no_stem,
    )


def _add_analyzer_flags(parser):
    parser.add_argument("--no-lowercase", action="store_true", help="keep token case")
    parser.add_argument("--no-stopwords", action="store_true", help="keep stopwords")
    parser.add_argument("--no-stem", action="store_true", help="disable Porter stemming")


def _add_split_flags(parser):
    parser.add_argument("--train-frac", type=float, default=0.8)
    parser.add_argument("--dev-frac", type=float, default=0.1)
    parser.add_argument("--test-frac", type=float, default=0.1)
    parser.add_argument("--dev-sample", type=int, default=None)
    parser.add_argument("--test-sample", type=int, default=None)
    parser.add_argument("--sample-seed", type=int, default=0)


def _split_spec(args) -> SplitSpec:
    return SplitSpec(
        train_fraction=args.train_frac, dev_fraction=args.dev_frac,
        test_fraction=args.test_frac, dev_sample_size=args.dev_sample,
        test_sample_size=args.test_sample, sample_seed=args.sample_seed)


def _load_corpus(path: str) -> Corpus:
    p = Path(path)
    if p.is_dir():
        p = p / "corpus.jsonl"
    corpus, _skipped = ingest_corpus(p)
    return corpus


def _load_queries(args, corpus: Corpus) -> QuerySet:
    if getattr(args, "query_file", None):
        adhoc, _ = ingest_corpus(args.query_file)
        queries = []
        for pid in sorted(adhoc.papers):
            paper = adhoc.papers[pid]
            relevant = frozenset(c for c in paper.out_citations if c in corpus)
            queries.append(Query(paper=paper, relevant=relevant))
        return QuerySet(queries)
    split = getattr(args, "split", None) or "test"
    train, dev, test = split_by_year(corpus, _split_spec(args))
    if split == "train":
        return queryset_from_corpus(train, corpus)
    return dev if split == "dev" else test


def _load_or_build_index(args, corpus: Corpus, analyzer: AnalyzerConfig) -> InvertedIndex:
    if getattr(args, "index", None):
        return InvertedIndex.load(args.index, expected_analyzer=analyzer)
    return build_index(corpus, analyzer)


def make_scorer(spec: str, index: InvertedIndex, timeout: float = 30.0):
    """Build a scorer from its selection string.

    identity | lexical:<model.json> | external:<host>:<port> |
    external-stdio:<command line>
    """
    if spec == "identity":
        return IdentityScorer()
    if spec.startswith("lexical:"):
        return LexicalScorer.load(spec.split(":", 1)[1], index)
    if spec.startswith("external-stdio:"):
        return ExternalScorer(connect_stdio(spec.split(":", 1)[1], timeout=timeout))
    if spec.startswith("external:"):
        _, host, port = spec.split(":", 2)
        return ExternalScorer(connect_tcp(host, int(port), timeout=timeout))
    raise ValueError(f"unknown scorer spec {spec!r}")


def _parse_budgets(args) -> list[tuple[int, int]]:
    if args.T == 0:
        return []
    kds = [int(x) for x in str(args.kd).split(",")] if args.kd is not None else []
    kcs = [int(x) for x in str(args.kc).split(",")] if args.kc is not None else []
    if len(kds) != args.T or len(kcs) != args.T:
        raise ValueError(f"--T {args.T} needs {args.T} comma-separated values "
                         f"for both --kd and --kc")
    return list(zip(kds, kcs))


def _pipeline_config(args) -> PipelineConfig:
    config = PipelineConfig(
        iterations=args.T,
        budgets=_parse_budgets(args),
        initial_depth=args.depth,
        query_type=args.query_type,
        token_budget=TokenBudget(max_total=args.max_tokens,
                                 query_budget=args.query_tokens,
                                 candidate_budget=args.candidate_tokens),
        scorer_spec=args.scorer,
        seed=args.seed,
        max_year_guard=args.max_year_guard,
    )
    config.validate()
    return config


# worker state inherited across fork() by pool processes
_POOL = {"queries": None, "config": None, "index": None, "corpus": None,
         "scorer_spec": None, "scorer": None, "timeout": 30.0}


def _pool_run_one(qid: str):
    if _POOL["scorer"] is None:
        _POOL["scorer"] = make_scorer(_POOL["scorer_spec"], _POOL["index"],
                                      timeout=_POOL["timeout"])
    query = _POOL["queries"][qid]
    ranked = run_pipeline(query.paper, _POOL["config"], _POOL["index"],
                          _POOL["corpus"], _POOL["scorer"])
    return qid, ranked


def _run_rankings(queries: QuerySet, config: PipelineConfig, index, corpus,
                  workers: int, timeout: float):
    by_id = {q.id: q for q in queries}
    qids = sorted(by_id)
    rankings = {}
    if workers <= 1:
        scorer = make_scorer(config.scorer_spec, index, timeout=timeout)
        for qid in qids:
            rankings[qid] = run_pipeline(by_id[qid].paper, config, index, corpus, scorer)
        return rankings
    _POOL.update(queries=by_id, config=config, index=index, corpus=corpus,
                 scorer_spec=config.scorer_spec, scorer=None, timeout=timeout)
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        for qid, ranked in pool.map(_pool_run_one, qids):
            rankings[qid] = ranked
    return rankings


def _write_meta(out_path: Path, payload: dict) -> None:
    meta_path = out_path.with_suffix(out_path.suffix + ".meta.json")
    meta_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                         encoding="utf-8")


def cmd_ingest(args) -> int:
    _require(args, "input", "out")
    raw, skipped = ingest_corpus(args.input)
    filtered = filter_corpus(raw)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_corpus(filtered, out_dir / "corpus.jsonl")
    stats = corpus_stats(filtered)
    stats_payload = {
        "ingested_docs": len(raw),
        "skipped_records": skipped,
        "filtered_docs": stats.total_docs,
        "total_citations": stats.total_citations,
        "avg_citations_per_doc": stats.avg_citations_per_doc,
        "avg_doc_length_chars": stats.avg_doc_length_chars,
    }
    (out_dir / "stats.json").write_text(
        json.dumps(stats_payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"Ingested {len(raw):,} docs ({skipped} skipped records)")
    print(f"After filtering: {stats.total_docs:,} docs")
    print(stats.as_table())
    return 0


def cmd_index(args) -> int:
    _require(args, "corpus", "out")
    corpus = _load_corpus(args.corpus)
    analyzer = _analyzer_from_args(args)
    index = build_index(corpus, analyzer)
    index.save(args.out)
    print(f"Indexed {index.N:,} docs, {len(index.postings):,} terms, "
          f"avgdl {index.avgdl:.1f} -> {args.out}")
    return 0


def cmd_run(args) -> int:
    _require(args, "corpus", "out")
    corpus = _load_corpus(args.corpus)
    analyzer = _analyzer_from_args(args)
    index = _load_or_build_index(args, corpus, analyzer)
    config = _pipeline_config(args)
    queries = _load_queries(args, corpus)
    if len(queries) == 0:
        raise CitenavError("no queries to run")
    out_path = Path(args.out)
    partial_path = out_path.with_suffix(out_path.suffix + ".partial")
    runtag = f"citenav.{config.fingerprint(analyzer)}"
    try:
        if args.dump_pools:
            # pool capture is single-process debug output
            from .pipeline import run_queries
            scorer = make_scorer(config.scorer_spec, index, timeout=args.scorer_timeout)
            result = run_queries(queries, config, index, corpus, scorer,
                                 collect_pools=True, analyzer=analyzer)
            rankings = result.rankings
            formats.write_jsonl(
                ({"qid": qid, "iteration": t,
                  "retained": pool.retained, "expanded": pool.expanded,
                  "provenance": {d: list(src) for d, src in pool.provenance.items()}}
                 for qid in sorted(result.pools)
                 for t, pool in enumerate(result.pools[qid])),
                args.dump_pools)
        else:
            rankings = _run_rankings(queries, config, index, corpus,
                                     workers=args.workers, timeout=args.scorer_timeout)
    except Exception:
        # leave whatever exists clearly marked as not a finished run
        partial_path.write_text("", encoding="utf-8")
        raise
    formats.write_run(rankings, partial_path, runtag)
    partial_path.replace(out_path)
    _write_meta(out_path, {
        "fingerprint": config.fingerprint(analyzer),
        "queries": len(queries),
        "iterations": config.iterations,
        "budgets": [list(b) for b in config.budgets],
        "scorer": config.scorer_spec,
        "workers": args.workers,
    })
    if args.qrels_out:
        formats.write_qrels({q.id: q.relevant for q in queries if q.relevant},
                            args.qrels_out)
    print(f"Wrote {sum(len(r) for r in rankings.values()):,} result rows "
          f"for {len(queries)} queries -> {out_path} [{runtag}]")
    return 0


def cmd_eval(args) -> int:
    _require(args, "run", "qrels", "out")
    rankings, _runtag = formats.read_run(args.run)
    qrels = formats.read_qrels(args.qrels)
    corpus = _load_corpus(args.corpus) if args.corpus else None
    report = evaluate(rankings, qrels, corpus=corpus,
                      overlap_depth=args.overlap_depth)
    print(report.as_table())
    out_path = Path(args.out)
    formats.write_jsonl(
        ({"qid": qid, "f1_at_20": m.f1_at_20, "mrr": m.mrr,
          "recall_at_1000": m.recall_at_1000, "term_overlap": m.term_overlap}
         for qid, m in sorted(report.per_query.items())),
        out_path)
    _write_meta(out_path, {
        "queries": report.query_count,
        "mean_f1_at_20": report.mean_f1_at_20,
        "mean_mrr": report.mean_mrr,
        "mean_recall_at_1000": report.mean_recall_at_1000,
        "mean_term_overlap": report.mean_term_overlap,
    })
    if not args.no_figures:
        plotting.plot_metric_distributions(report, out_path.with_suffix(".png"))
    return 0


def cmd_pairs(args) -> int:
    _require(args, "corpus", "out")
    corpus = _load_corpus(args.corpus)
    analyzer = _analyzer_from_args(args)
    index = _load_or_build_index(args, corpus, analyzer)
    queries = _load_queries(args, corpus)
    pairs, stats = generate_training_pairs(
        queries, index, corpus, top_k=args.topk, sampling_mode=args.mode,
        query_type=args.query_type, seed=args.seed)
    out_path = Path(args.out)
    formats.write_pairs(pairs, out_path)
    _write_meta(out_path, {
        "pairs": stats.total, "positives": stats.positives,
        "negatives": stats.negatives, "positive_fraction": stats.positive_fraction,
        "mode": args.mode, "top_k": args.topk,
    })
    print(stats.summary())
    return 0


def cmd_train(args) -> int:
    _require(args, "corpus", "pairs", "out")
    corpus = _load_corpus(args.corpus)
    analyzer = _analyzer_from_args(args)
    index = _load_or_build_index(args, corpus, analyzer)
    pairs = formats.read_pairs(args.pairs)
    scorer = train_lexical_scorer(pairs, index, epochs=args.epochs,
                                  learning_rate=args.lr, seed=args.seed,
                                  corpus=corpus)
    scorer.save(args.out)
    print(f"Trained on {len(pairs)} pairs, final loss {scorer.final_loss:.4f} -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    _require(args, "corpus", "out")
    corpus = _load_corpus(args.corpus)
    analyzer = _analyzer_from_args(args)
    index = _load_or_build_index(args, corpus, analyzer)
    queries = _load_queries(args, corpus)
    scorer = make_scorer(args.scorer, index, timeout=args.scorer_timeout)
    fixed = []
    if args.fixed:
        for chunk in args.fixed.split(","):
            k_d, k_c = chunk.split(":")
            fixed.append((int(k_d), int(k_c)))
    result = sweep_budgets(queries, index, corpus, scorer,
                           grid_step=args.step, budget_sum=args.sum,
                           fixed_budgets=fixed, initial_depth=args.depth,
                           query_type=args.query_type)
    out_path = Path(args.out)
    formats.write_jsonl(
        ({"k_d": p.k_d, "k_c": p.k_c, "mean_recall": p.mean_recall} for p in result.curve),
        out_path)
    _write_meta(out_path, {"best_k_d": result.best[0], "best_k_c": result.best[1],
                           "step": args.step, "sum": args.sum, "fixed": args.fixed or ""})
    if not args.no_figures:
        plotting.plot_sweep_curve(result.curve, out_path.with_suffix(".png"))
    print(f"Best budgets: k_d={result.best[0]}, k_c={result.best[1]}")
    for p in result.curve:
        print(f"  k_d={p.k_d:>5}  k_c={p.k_c:>5}  mean recall={p.mean_recall:.4f}")
    return 0


def cmd_dedup(args) -> int:
    _require(args, "train", "holdout", "out")
    train = _load_corpus(args.train)
    holdout_path = Path(args.holdout)
    if holdout_path.suffix == ".jsonl":
        holdout_corpus, _ = ingest_corpus(holdout_path)
        titles = [holdout_corpus.papers[pid].title for pid in sorted(holdout_corpus.papers)]
    else:
        titles = [line.strip() for line in holdout_path.read_text("utf-8").splitlines()
                  if line.strip()]
    survivors, removed = remove_leaked(train, titles, threshold=args.threshold)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_corpus(survivors, out_dir / "corpus.jsonl")
    formats.write_jsonl(
        ({"train_id": r.train_id, "matched_title": r.matched_title,
          "similarity": r.similarity} for r in removed),
        out_dir / "removed.jsonl")
    print(f"Removed {len(removed)} leaked docs; {len(survivors):,} docs survive filtering")
    return 0


def cmd_repl(args) -> int:
    _require(args, "corpus")
    corpus = _load_corpus(args.corpus)
    analyzer = _analyzer_from_args(args)
    index = _load_or_build_index(args, corpus, analyzer)
    scorer = make_scorer(args.scorer, index, timeout=args.scorer_timeout)
    config = PipelineConfig(
        iterations=1 if args.navigate else 0,
        budgets=[(args.kd, args.kc)] if args.navigate else [],
        initial_depth=args.depth, scorer_spec=args.scorer)
    print("Interactive query mode; empty title quits.")
    n = 0
    while True:
        try:
            title = input("title> ").strip()
        except EOFError:
            break
        if not title:
            break
        try:
            abstract = input("abstract> ").strip()
        except EOFError:
            abstract = ""
        n += 1
        paper = Paper(id=f"~repl{n}", title=title, abstract=abstract)
        ranked = run_pipeline(paper, config, index, corpus, scorer)
        for rank, (doc_id, score) in enumerate(ranked.top(args.top), start=1):
            print(f"  {rank:>2}. [{score:.4f}] {doc_id}  {corpus[doc_id].title[:90]}")
    return 0


def _add_run_like_flags(parser, with_pipeline=True):
    parser.add_argument("--corpus", default=None, help="corpus jsonl or ingest output dir")
    parser.add_argument("--index", default=None, help="prebuilt index artifact to load")
    parser.add_argument("--split", choices=["train", "dev", "test"], default="test")
    parser.add_argument("--query-file", default=None,
                        help="ad-hoc query records (jsonl) instead of a split")
    _add_split_flags(parser)
    _add_analyzer_flags(parser)
    if with_pipeline:
        parser.add_argument("--T", type=int, default=0, help="navigation iterations")
        parser.add_argument("--kd", default=None, help="comma-separated k_d per iteration")
        parser.add_argument("--kc", default=None, help="comma-separated k_c per iteration")
        parser.add_argument("--depth", type=int, default=1000, help="initial retrieval depth")
        parser.add_argument("--query-type", default="title_and_abstract",
                            choices=["title", "title_and_abstract", "key_terms"])
        parser.add_argument("--max-tokens", type=int, default=512)
        parser.add_argument("--query-tokens", type=int, default=256)
        parser.add_argument("--candidate-tokens", type=int, default=256)
        parser.add_argument("--max-year-guard", action="store_true",
                            help="skip navigated docs newer than the query")
        parser.add_argument("--scorer", default=os.environ.get(SCORER_ENV_VAR, "identity"),
                            help="identity | lexical:FILE | external:HOST:PORT | "
                                 "external-stdio:CMD")
        parser.add_argument("--scorer-timeout", type=float, default=30.0)
        parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citenav",
        description="Citation recommendation: BM25 retrieval, citation-graph "
                    "navigation, pluggable re-ranking.")
    parser.add_argument("--config", default=None,
                        help="YAML/JSON config file; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, filter, and store a corpus")
    p.add_argument("--input", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build and save the inverted index")
    p.add_argument("--corpus", default=None)
    p.add_argument("--out", default=None)
    _add_analyzer_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("run", help="run the retrieval pipeline over a query set")
    _add_run_like_flags(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="TREC run file")
    p.add_argument("--qrels-out", default=None, help="also write the gold qrels")
    p.add_argument("--dump-pools", default=None,
                   help="debug: write per-iteration candidate pools with "
                        "provenance to this jsonl file (single-process)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a run file against qrels")
    p.add_argument("--run", default=None)
    p.add_argument("--qrels", default=None)
    p.add_argument("--corpus", default=None, help="enables the term-overlap column")
    p.add_argument("--overlap-depth", type=int, default=None)
    p.add_argument("--out", default=None, help="per-query report (jsonl)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pairs", help="export labeled training pairs")
    _add_run_like_flags(p, with_pipeline=False)
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("--mode", default="bm25_top_k",
                   choices=["bm25_top_k", "add_missed_positives", "add_random_negatives"])
    p.add_argument("--query-type", default="title_and_abstract",
                   choices=["title", "title_and_abstract", "key_terms"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("train", help="fit the lexical scorer on exported pairs")
    p.add_argument("--corpus", default=None)
    p.add_argument("--index", default=None)
    _add_analyzer_flags(p)
    p.add_argument("--pairs", default=None)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="grid-search one iteration's budgets")
    _add_run_like_flags(p, with_pipeline=False)
    p.add_argument("--scorer", default=os.environ.get(SCORER_ENV_VAR, "identity"))
    p.add_argument("--scorer-timeout", type=float, default=30.0)
    p.add_argument("--step", type=int, default=100)
    p.add_argument("--sum", type=int, default=1000)
    p.add_argument("--depth", type=int, default=1000)
    p.add_argument("--query-type", default="title_and_abstract",
                   choices=["title", "title_and_abstract", "key_terms"])
    p.add_argument("--fixed", default=None,
                   help="earlier iterations' budgets, e.g. 300:700,700:300")
    p.add_argument("--out", default=None, help="sweep curve (jsonl)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dedup", help="remove training docs leaked into holdout sets")
    p.add_argument("--train", default=None, help="training corpus jsonl or dir")
    p.add_argument("--holdout", default=None, help="holdout titles (.txt) or corpus (.jsonl)")
    p.add_argument("--threshold", type=float, default=0.7)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("repl", help="interactive ad-hoc queries")
    p.add_argument("--corpus", default=None)
    p.add_argument("--index", default=None)
    _add_analyzer_flags(p)
    p.add_argument("--scorer", default=os.environ.get(SCORER_ENV_VAR, "identity"))
    p.add_argument("--scorer-timeout", type=float, default=30.0)
    p.add_argument("--navigate", action="store_true", help="apply one navigation iteration")
    p.add_argument("--kd", type=int, default=300)
    p.add_argument("--kc", type=int, default=700)
    p.add_argument("--depth", type=int, default=1000)
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_repl)

    return parser


def _config_defaults(argv) -> dict:
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        loaded = yaml.safe_load(handle) or {}
    if not isinstance(loaded, dict):
        raise CitenavError(f"config file {path} must hold a mapping")
    return {str(k).replace("-", "_"): v for k, v in loaded.items()}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        defaults = _config_defaults(argv)
        if defaults:
            for action in parser._subparsers._group_actions:  # noqa: SLF001
                for sub_parser in action.choices.values():
                    sub_parser.set_defaults(**defaults)
        args = parser.parse_args(argv)
        return args.func(args)
    except (CitenavError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
