"""IR metrics, the experiment runner, and report comparison.

Metrics follow trec-eval conventions: relevance means grade > 0, queries
without any relevant document are excluded from means (and counted), and
nDCG uses the exponential-gain form

    DCG@k  = sum_{i=1..k} (2^grade_i - 1) / log2(i + 1)
    nDCG@k = DCG@k / IDCG@k          (0 when IDCG@k = 0)

Experiments are fully described by an ExperimentConfig; reports carry the
config and its fingerprint so runs stay comparable and reproducible.  Two
runs of the same config serialize to byte-identical JSON.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import dense as dense_mod
from . import referral as referral_mod
from . import sparse as sparse_mod
from .corpus import Corpus, DocId, Qrels, index_text, load_corpus, split_by_year
from .errors import UsageError, ValidationError

logger = logging.getLogger(__name__)

METRIC_NAMES = ("recall", "mrr", "ndcg")
RETRIEVERS = ("sparse", "dense")
SPARSE_STRATEGIES = ("doc_only", "concat")


@dataclass
class Ranking:
    """The ordered retrieval result for one query."""

    query_id: str
    doc_ids: list[DocId]
    scores: list[float]

    def validate(self) -> None:
        if len(self.doc_ids) != len(self.scores):
            raise ValidationError("doc_ids and scores must align")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValidationError(f"ranking for {self.query_id!r} repeats a document")
        if any(a < b for a, b in zip(self.scores, self.scores[1:])):
            raise ValidationError(f"ranking for {self.query_id!r} has increasing scores")


def _relevant_docs(qrels: Qrels, query_id: str) -> set[DocId]:
    return {did for did, grade in qrels.get(query_id, {}).items() if grade > 0}


def recall_at_k(ranking: Ranking, qrels: Qrels, k: int) -> float:
    """Fraction of the query's relevant documents found in the top k."""
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    relevant = _relevant_docs(qrels, ranking.query_id)
    if not relevant:
        raise ValidationError(f"query {ranking.query_id!r} has no relevant documents")
    hits = sum(1 for did in ranking.doc_ids[:k] if did in relevant)
    return hits / len(relevant)


def mrr_at_k(ranking: Ranking, qrels: Qrels, k: int) -> float:
    """Reciprocal rank of the first relevant document in the top k, else 0."""
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    relevant = _relevant_docs(qrels, ranking.query_id)
    if not relevant:
        raise ValidationError(f"query {ranking.query_id!r} has no relevant documents")
    for rank, did in enumerate(ranking.doc_ids[:k], start=1):
        if did in relevant:
            return 1.0 / rank
    return 0.0


def ndcg_at_k(ranking: Ranking, qrels: Qrels, k: int) -> float:
    """Exponential-gain nDCG at cutoff k; 0 when the ideal DCG is 0."""
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    grades = qrels.get(ranking.query_id, {})
    dcg = 0.0
    for rank, did in enumerate(ranking.doc_ids[:k], start=1):
        gain = (2 ** grades.get(did, 0)) - 1
        if gain:
            dcg += gain / math.log2(rank + 1)
    ideal = sorted(grades.values(), reverse=True)[:k]
    idcg = 0.0
    for rank, grade in enumerate(ideal, start=1):
        gain = (2 ** grade) - 1
        if gain:
            idcg += gain / math.log2(rank + 1)
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


_METRIC_FUNCS: dict[str, Callable[[Ranking, Qrels, int], float]] = {
    "recall": recall_at_k,
    "mrr": mrr_at_k,
    "ndcg": ndcg_at_k,
}


@dataclass
class ExperimentConfig:
    """Everything that determines one run: inputs, retriever, aggregation,
    sampling, and the metric grid."""

    docs: str
    queries: str
    qrels: str
    retriever: str = "sparse"
    strategy: str = "doc_only"
    k1: float = 1.2
    b: float = 0.75
    referrals: str | None = None
    embeddings: str | None = None
    max_referrals: int = 30
    seed: int = 0
    pool_cutoff_year: int | None = None
    candidate_cutoff_year: int | None = None
    ks: list[int] = field(default_factory=lambda: [1, 10])
    metrics: list[str] = field(default_factory=lambda: list(METRIC_NAMES))
    separator: str = " "
    doc_repeat: int = 1
    lowercase: bool = True
    stopwords: list[str] = field(default_factory=list)
    literal_min: bool = False
    threads: int = 1
    run_tag: str = "refaug"

    def __post_init__(self):
        if self.retriever not in RETRIEVERS:
            raise ValidationError(f"unknown retriever {self.retriever!r}")
        if self.retriever == "sparse" and self.strategy not in SPARSE_STRATEGIES:
            raise ValidationError(
                f"sparse retriever supports strategies {SPARSE_STRATEGIES}, "
                f"got {self.strategy!r}"
            )
        if self.retriever == "dense" and self.strategy not in dense_mod.STRATEGIES:
            raise ValidationError(f"unknown dense strategy {self.strategy!r}")
        if self.retriever == "dense" and not self.embeddings:
            raise ValidationError("dense runs require an embeddings file")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValidationError("every k cutoff must be >= 1")
        for name in self.metrics:
            if name not in METRIC_NAMES:
                raise ValidationError(f"unknown metric {name!r}")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**data)

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an experiment config from JSON (or TOML on Python >= 3.11)."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError as exc:
            raise UsageError(
                "TOML configs need Python >= 3.11 (tomllib); use JSON here"
            ) from exc
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    else:
        with path.open(encoding="utf-8") as fh:
            data = json.load(fh)
    return ExperimentConfig.from_dict(data)


@dataclass
class MetricReport:
    """Per-query metric values and their means for one configuration."""

    config: dict
    fingerprint: str
    metrics: dict[str, dict]  # "recall@10" -> {"mean": float, "per_query": {...}}
    queries_evaluated: int
    queries_skipped: int
    rankings: list[Ranking] = field(default_factory=list, compare=False, repr=False)

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "fingerprint": self.fingerprint,
            "metrics": self.metrics,
            "queries_evaluated": self.queries_evaluated,
            "queries_skipped": self.queries_skipped,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        payload = json.loads(text)
        return cls(
            config=payload["config"],
            fingerprint=payload["fingerprint"],
            metrics=payload["metrics"],
            queries_evaluated=payload["queries_evaluated"],
            queries_skipped=payload["queries_skipped"],
        )


def save_report(report: MetricReport, path: str | Path) -> None:
    Path(path).write_text(report.to_json(), encoding="utf-8")


def load_report(path: str | Path) -> MetricReport:
    return MetricReport.from_json(Path(path).read_text(encoding="utf-8"))


def save_trec_run(rankings: Sequence[Ranking], path: str | Path, tag: str = "refaug") -> None:
    """Dump rankings in TREC run format: ``qid Q0 docid rank score tag``."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for ranking in rankings:
            for rank, (did, score) in enumerate(zip(ranking.doc_ids, ranking.scores), start=1):
                fh.write(f"{ranking.query_id} Q0 {did} {rank} {score:.6f} {tag}\n")


def _sparse_rankings(
    config: ExperimentConfig,
    corpus: Corpus,
    pool: referral_mod.ReferralPool,
    k: int,
) -> list[Ranking]:
    tokenizer = sparse_mod.Tokenizer(
        lowercase=config.lowercase, stopwords=frozenset(config.stopwords)
    )
    params = sparse_mod.Bm25Params(k1=config.k1, b=config.b)
    texts = []
    for did in sorted(corpus.documents):
        base = index_text(corpus.documents[did])
        if config.strategy == "concat":
            sampled = referral_mod.sample_referrals(
                pool, did, config.max_referrals, config.seed
            )
            text = sparse_mod.augment_concat(
                base, sampled, config.separator, config.doc_repeat
            )
        else:
            text = base
        texts.append((did, text))
    index = sparse_mod.build_index(texts, tokenizer)

    def run_one(query) -> Ranking:
        hits = sparse_mod.search_sparse(index, params, tokenizer, query.text, k)
        return Ranking(
            query_id=query.id,
            doc_ids=[did for did, _ in hits],
            scores=[score for _, score in hits],
        )

    return _map_queries(run_one, corpus.queries, config.threads)


def _dense_rankings(
    config: ExperimentConfig,
    corpus: Corpus,
    pool: referral_mod.ReferralPool,
    k: int,
) -> list[Ranking]:
    embeddings = dense_mod.load_embeddings(config.embeddings)
    index = dense_mod.build_dense_index(
        sorted(corpus.documents),
        embeddings,
        pool,
        strategy=config.strategy,
        max_referrals=config.max_referrals,
        seed=config.seed,
    )
    missing = [
        dense_mod.qry_key(q.id) for q in corpus.queries
        if dense_mod.qry_key(q.id) not in embeddings
    ]
    if missing:
        raise ValidationError("missing embedding keys: " + ", ".join(sorted(missing)))

    def run_one(query) -> Ranking:
        hits = dense_mod.search_dense(
            index, embeddings.get(dense_mod.qry_key(query.id)), k, config.literal_min
        )
        return Ranking(
            query_id=query.id,
            doc_ids=[vs.doc for vs in hits],
            scores=[vs.score for vs in hits],
        )

    return _map_queries(run_one, corpus.queries, config.threads)


def _map_queries(fn, queries, threads: int):
    if threads > 1 and len(queries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, queries))
    return [fn(q) for q in queries]


def run_experiment(config: ExperimentConfig) -> MetricReport:
    """Execute one configuration end to end: load, filter, index, search,
    score.  Deterministic for a fixed config; the report is independent of
    ingestion order and thread count."""
    corpus = load_corpus(config.docs, config.queries, config.qrels)
    if config.candidate_cutoff_year is not None:
        corpus, _ = split_by_year(corpus, config.candidate_cutoff_year)

    if config.referrals:
        pool = referral_mod.load_pool(config.referrals)
    else:
        pool = referral_mod.ReferralPool()
    if config.pool_cutoff_year is not None:
        pool = referral_mod.filter_pool(pool, config.pool_cutoff_year)

    k = max(config.ks)
    if config.retriever == "sparse":
        rankings = _sparse_rankings(config, corpus, pool, k)
    else:
        rankings = _dense_rankings(config, corpus, pool, k)
    for ranking in rankings:
        ranking.validate()

    by_query = {r.query_id: r for r in rankings}
    scorable = sorted(
        qid for qid in by_query if _relevant_docs(corpus.qrels, qid)
    )
    skipped = len(by_query) - len(scorable)
    if skipped:
        logger.info("run_experiment: %d query(ies) without relevant docs skipped", skipped)

    metrics: dict[str, dict] = {}
    for name in config.metrics:
        fn = _METRIC_FUNCS[name]
        for k_cut in config.ks:
            per_query = {qid: fn(by_query[qid], corpus.qrels, k_cut) for qid in scorable}
            mean = sum(per_query[qid] for qid in scorable) / len(scorable) if scorable else 0.0
            metrics[f"{name}@{k_cut}"] = {"mean": mean, "per_query": per_query}

    return MetricReport(
        config=config.to_dict(),
        fingerprint=config.fingerprint(),
        metrics=metrics,
        queries_evaluated=len(scorable),
        queries_skipped=skipped,
        rankings=rankings,
    )


def compare_reports(a: MetricReport, b: MetricReport) -> dict:
    """Per-metric deltas (b minus a) and per-query win/tie/loss counts.

    Raises:
        ValidationError: the reports cover different metrics or query sets.
    """
    if set(a.metrics) != set(b.metrics):
        raise ValidationError(
            f"metric sets differ: {sorted(a.metrics)} vs {sorted(b.metrics)}"
        )
    table: dict[str, dict] = {}
    for name in sorted(a.metrics):
        pq_a = a.metrics[name]["per_query"]
        pq_b = b.metrics[name]["per_query"]
        if set(pq_a) != set(pq_b):
            raise ValidationError(f"query sets differ for metric {name}")
        wins = sum(1 for qid in pq_a if pq_b[qid] > pq_a[qid])
        losses = sum(1 for qid in pq_a if pq_b[qid] < pq_a[qid])
        ties = len(pq_a) - wins - losses
        table[name] = {
            "a": a.metrics[name]["mean"],
            "b": b.metrics[name]["mean"],
            "delta": b.metrics[name]["mean"] - a.metrics[name]["mean"],
            "wins": wins,
            "ties": ties,
            "losses": losses,
        }
    return {
        "fingerprint_a": a.fingerprint,
        "fingerprint_b": b.fingerprint,
        "queries": len(next(iter(a.metrics.values()))["per_query"]) if a.metrics else 0,
        "metrics": table,
    }
