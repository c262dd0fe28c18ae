"""Command-line interface.

Subcommands: ``extract``, ``index``, ``manifest``, ``search``, ``evaluate``,
``compare``.  Every command exits 0 on success and nonzero on failure, with
a single machine-parseable line on stderr:

    refaug: error: <category>: <message>

Summaries and reports go to stdout as JSON; search results go to stdout as
TSV.  All randomness flows from ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import dense as dense_mod
from . import referral as referral_mod
from . import sparse as sparse_mod
from .corpus import index_text, load_corpus, load_queries
from .errors import RefaugError, UsageError
from .evaluation import (
    compare_reports,
    load_config,
    load_report,
    run_experiment,
    save_report,
    save_trec_run,
)

logger = logging.getLogger(__name__)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2))


def _load_pool_arg(path: str | None) -> referral_mod.ReferralPool:
    if path is None:
        return referral_mod.ReferralPool()
    return referral_mod.load_pool(path)


def cmd_extract(args) -> int:
    corpus = load_corpus(args.docs)
    config = referral_mod.ExtractionConfig(
        window_tokens=args.window_tokens,
        mask_token=args.mask_token,
        unit=args.unit,
        seed=args.seed,
        max_referrals=args.max_referrals,
    )
    pool = referral_mod.extract_referrals(corpus, config)
    referral_mod.save_pool(pool, args.out)
    summary = {"out": args.out, "referrals": len(pool), "targets": len(pool.by_target)}
    summary.update(pool.stats.as_dict())
    _emit(summary)
    return 0


def _augmented_texts(corpus, pool, args):
    texts = []
    for did in sorted(corpus.documents):
        base = index_text(corpus.documents[did])
        if args.strategy == "concat":
            sampled = referral_mod.sample_referrals(pool, did, args.max_referrals, args.seed)
            texts.append((did, sparse_mod.augment_concat(base, sampled)))
        else:
            texts.append((did, base))
    return texts


def cmd_index(args) -> int:
    corpus = load_corpus(args.docs)
    pool = _load_pool_arg(args.referrals)
    if args.retriever == "sparse":
        if args.strategy not in ("doc_only", "concat"):
            raise UsageError(
                f"sparse indexing supports doc_only or concat, got {args.strategy!r}"
            )
        tokenizer = sparse_mod.Tokenizer(lowercase=not args.no_lowercase)
        index = sparse_mod.build_index(_augmented_texts(corpus, pool, args), tokenizer)
        sparse_mod.save_index(index, args.out)
        _emit(
            {
                "out": args.out,
                "retriever": "sparse",
                "strategy": args.strategy,
                "documents": index.doc_count,
                "terms": len(index.postings),
            }
        )
    else:
        if args.embeddings is None:
            raise UsageError("dense indexing requires --embeddings")
        embeddings = dense_mod.load_embeddings(args.embeddings)
        index = dense_mod.build_dense_index(
            sorted(corpus.documents),
            embeddings,
            pool,
            strategy=args.strategy,
            max_referrals=args.max_referrals,
            seed=args.seed,
        )
        dense_mod.save_dense_index(index, args.out)
        _emit(
            {
                "out": args.out,
                "retriever": "dense",
                "strategy": args.strategy,
                "documents": len(index.doc_ids),
                "views": sum(v.shape[0] for v in index.views),
                "dim": index.dim,
            }
        )
    return 0


def cmd_manifest(args) -> int:
    corpus = load_corpus(args.docs, queries_path=args.queries)
    pool = _load_pool_arg(args.referrals)
    entries = dense_mod.build_manifest(
        corpus,
        pool,
        strategy=args.strategy,
        max_referrals=args.max_referrals,
        seed=args.seed,
    )
    dense_mod.save_manifest(entries, args.out, args.strategy, args.max_referrals, args.seed)
    _emit({"out": args.out, "entries": len(entries)})
    return 0


def _sniff_magic(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read(8)


def _print_hits_sparse(hits, query_id: str | None) -> None:
    for rank, (did, score) in enumerate(hits, start=1):
        prefix = f"{query_id}\t" if query_id is not None else ""
        print(f"{prefix}{rank}\t{did}\t{score:.6f}")


def cmd_search(args) -> int:
    if args.k < 1:
        raise UsageError(f"k must be >= 1, got {args.k}")
    magic = _sniff_magic(args.index)
    if magic == sparse_mod.MAGIC_SPARSE:
        index = sparse_mod.load_index(args.index)
        params = sparse_mod.Bm25Params(k1=args.k1, b=args.b)
        if args.query is not None:
            hits = sparse_mod.search_sparse(
                index, params, index.tokenizer, args.query, args.k
            )
            _print_hits_sparse(hits, None)
        elif args.queries_file is not None:
            for query in load_queries(args.queries_file):
                hits = sparse_mod.search_sparse(
                    index, params, index.tokenizer, query.text, args.k
                )
                _print_hits_sparse(hits, query.id)
        else:
            raise UsageError("sparse search needs --query or --queries-file")
    elif magic == dense_mod.MAGIC_DENSE_INDEX:
        index = dense_mod.load_dense_index(args.index)
        if args.embeddings is None:
            raise UsageError("dense search requires --embeddings for query vectors")
        embeddings = dense_mod.load_embeddings(args.embeddings)
        if args.query_id is not None:
            query_ids = [args.query_id]
        elif args.queries_file is not None:
            query_ids = [q.id for q in load_queries(args.queries_file)]
        else:
            raise UsageError("dense search needs --query-id or --queries-file")
        positions = {did: pos for pos, did in enumerate(index.doc_ids)}
        show_view = index.strategy == "shortest_path"
        for qid in query_ids:
            vec = embeddings.get(dense_mod.qry_key(qid))
            hits = dense_mod.search_dense(index, vec, args.k, args.literal_min)
            for rank, vs in enumerate(hits, start=1):
                prefix = f"{qid}\t" if len(query_ids) > 1 or args.queries_file else ""
                line = f"{prefix}{rank}\t{vs.doc}\t{vs.score:.6f}"
                if show_view:
                    line += f"\t{index.view_keys[positions[vs.doc]][vs.best_view]}"
                print(line)
    else:
        raise UsageError(f"{args.index}: unrecognized index file (magic {magic!r})")
    return 0


def cmd_evaluate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.threads is not None:
        config.threads = args.threads
    report = run_experiment(config)
    if args.out:
        save_report(report, args.out)
    if args.dump_run:
        save_trec_run(report.rankings, args.dump_run, config.run_tag)
    sys.stdout.write(report.to_json())
    return 0


def cmd_compare(args) -> int:
    table = compare_reports(load_report(args.report_a), load_report(args.report_b))
    _emit(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refaug",
        description="Referral-augmented zero-shot retrieval: extract link-based "
        "referrals, build augmented sparse/dense indices, search, and evaluate.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract referrals from corpus link spans")
    p.add_argument("--docs", required=True, help="docs-jsonl corpus")
    p.add_argument("--out", required=True, help="output referrals-jsonl")
    p.add_argument("--unit", choices=("sentence", "window"), default="window")
    p.add_argument("--window-tokens", type=int, default=referral_mod.DEFAULT_WINDOW_TOKENS)
    p.add_argument("--mask-token", default=referral_mod.DEFAULT_MASK_TOKEN)
    p.add_argument("--max-referrals", type=int, default=referral_mod.DEFAULT_MAX_REFERRALS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("index", help="build a sparse or dense index file")
    p.add_argument("--docs", required=True)
    p.add_argument("--referrals", help="referrals-jsonl from `refaug extract`")
    p.add_argument("--retriever", choices=("sparse", "dense"), default="sparse")
    p.add_argument("--strategy", choices=dense_mod.STRATEGIES, default="doc_only")
    p.add_argument("--embeddings", help="RAREMB01 file (dense only)")
    p.add_argument("--max-referrals", type=int, default=referral_mod.DEFAULT_MAX_REFERRALS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-lowercase", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser(
        "manifest", help="list every text unit an embedding provider must encode"
    )
    p.add_argument("--docs", required=True)
    p.add_argument("--queries")
    p.add_argument("--referrals")
    p.add_argument("--strategy", choices=dense_mod.STRATEGIES, default="doc_only")
    p.add_argument("--max-referrals", type=int, default=referral_mod.DEFAULT_MAX_REFERRALS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("search", help="query an index file, results as TSV")
    p.add_argument("--index", required=True)
    p.add_argument("--query", help="query text (sparse index)")
    p.add_argument("--query-id", help="query id resolved via --embeddings (dense index)")
    p.add_argument("--queries-file", help="queries-jsonl to run in bulk")
    p.add_argument("--embeddings", help="RAREMB01 file with qry: keys (dense)")
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument(
        "--literal-min",
        action="store_true",
        help="debug variant: aggregate shortest-path views by min instead of max",
    )
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("evaluate", help="run a configured experiment, report JSON")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", help="also write the report to this path")
    p.add_argument("--dump-run", help="write per-query rankings in TREC run format")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--threads", type=int, help="override worker parallelism")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="delta table between two report files")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RefaugError as exc:
        print(f"refaug: error: {exc.category}: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, UsageError) else 1
    except OSError as exc:
        print(f"refaug: error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
