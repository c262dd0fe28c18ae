"""Referral-augmented zero-shot retrieval.

Documents gain alternate index-time views from *referrals*: passages in
other documents that cite or hyperlink them.  The package extracts such
referrals from link metadata, folds them into sparse (BM25) or dense
(dot-product) indices under several aggregation strategies, and evaluates
retrieval quality with standard IR metrics — including training-free
updates of the referral pool over time.
"""

from .corpus import (
    Corpus,
    Document,
    LinkSpan,
    Query,
    index_text,
    load_corpus,
    load_qrels,
    load_queries,
    save_corpus,
    split_by_year,
)
from .dense import (
    DenseIndex,
    EmbeddingSet,
    ViewScore,
    aggregate_mean,
    build_dense_index,
    build_manifest,
    load_dense_index,
    load_embeddings,
    save_dense_index,
    score_shortest_path,
    search_dense,
    write_embeddings,
)
from .errors import ParseError, RefaugError, UsageError, ValidationError
from .evaluation import (
    ExperimentConfig,
    MetricReport,
    Ranking,
    compare_reports,
    mrr_at_k,
    ndcg_at_k,
    recall_at_k,
    run_experiment,
)
from .referral import (
    ExtractionConfig,
    Referral,
    ReferralPool,
    extract_referrals,
    extract_window,
    filter_pool,
    load_pool,
    mask_span,
    sample_referrals,
    save_pool,
)
from .sparse import (
    Bm25Params,
    InvertedIndex,
    Tokenizer,
    augment_concat,
    bm25_score,
    build_index,
    load_index,
    save_index,
    search_sparse,
)

__version__ = "0.1.0"

__all__ = [
    "Bm25Params",
    "Corpus",
    "DenseIndex",
    "Document",
    "EmbeddingSet",
    "ExperimentConfig",
    "ExtractionConfig",
    "InvertedIndex",
    "LinkSpan",
    "MetricReport",
    "ParseError",
    "Query",
    "Ranking",
    "RefaugError",
    "Referral",
    "ReferralPool",
    "Tokenizer",
    "UsageError",
    "ValidationError",
    "ViewScore",
    "aggregate_mean",
    "augment_concat",
    "bm25_score",
    "build_dense_index",
    "build_index",
    "build_manifest",
    "compare_reports",
    "extract_referrals",
    "extract_window",
    "filter_pool",
    "index_text",
    "load_corpus",
    "load_dense_index",
    "load_embeddings",
    "load_index",
    "load_pool",
    "load_qrels",
    "load_queries",
    "mask_span",
    "mrr_at_k",
    "ndcg_at_k",
    "recall_at_k",
    "run_experiment",
    "sample_referrals",
    "save_corpus",
    "save_dense_index",
    "save_index",
    "save_pool",
    "score_shortest_path",
    "search_dense",
    "search_sparse",
    "split_by_year",
    "write_embeddings",
]
