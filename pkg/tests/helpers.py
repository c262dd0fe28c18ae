"""Shared test utilities: synthetic corpora, an independent embedding-file
writer, and naive reference implementations used as oracles.

The oracles deliberately re-derive everything with plain loops and direct
formula transcription; they never call into the code paths they check.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np


# ---------------------------------------------------------------------------
# corpus file builders


def write_jsonl(path: Path, rows: list[dict]) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def write_qrels_tsv(path: Path, rows: list[tuple[str, str, int]]) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for qid, did, grade in rows:
            fh.write(f"{qid}\t{did}\t{grade}\n")
    return path


def doc_row(doc_id, title="", body="", year=None, links=()):
    return {
        "id": doc_id,
        "title": title,
        "body": body,
        "year": year,
        "links": [
            {"start": s, "end": e, "target": t, "kind": k} for s, e, t, k in links
        ],
    }


def lexical_gap_corpus(
    tmp_path: Path,
    n_docs: int = 200,
    doc_year: int = 2017,
    query_words_per_doc: int = 4,
):
    """A citation ring with a hard lexical gap.

    Each document's own text uses a private vocabulary, every query uses a
    different private vocabulary known only to the citing sentence of the
    document's single citer.  Plain term matching cannot reach the gold
    document; concatenating referrals can.

    Returns (docs_path, queries_path, qrels_path).
    """
    docs = []
    queries = []
    qrels = []
    for i in range(n_docs):
        did = f"d{i:03d}"
        # Doc i cites doc i+1 (a ring), so each doc is cited exactly once.
        target = f"d{(i + 1) % n_docs:03d}"
        qwords_of_target = " ".join(
            f"q{(i + 1) % n_docs:03d}w{j}" for j in range(query_words_per_doc)
        )
        own = " ".join(f"body{i:03d}t{j}" for j in range(6))
        citing = f"{qwords_of_target} (CITE:{target}) closes."
        body = f"{own}. {citing}"
        start = body.index(f"(CITE:{target})")
        end = start + len(f"(CITE:{target})")
        docs.append(
            doc_row(
                did,
                title=f"title{i:03d}",
                body=body,
                year=doc_year,
                links=[(start, end, target, "citation")],
            )
        )
        qid = f"q{i:03d}"
        queries.append(
            {
                "id": qid,
                "text": " ".join(f"q{i:03d}w{j}" for j in range(query_words_per_doc)),
                "year": doc_year + 2,
            }
        )
        qrels.append((qid, did, 1))
    docs_path = write_jsonl(tmp_path / "docs.jsonl", docs)
    queries_path = write_jsonl(tmp_path / "queries.jsonl", queries)
    qrels_path = write_qrels_tsv(tmp_path / "qrels.tsv", qrels)
    return docs_path, queries_path, qrels_path


def temporal_corpus(
    tmp_path: Path,
    n_targets: int = 100,
    early_year: int = 2018,
    late_year: int = 2019,
    late_fraction: float = 0.3,
):
    """Targets plus two generations of citing documents.

    Early citers (year <= early_year) cite every target with bland filler
    sentences.  Late citers (late_year) cite the first ``late_fraction`` of
    targets with sentences drawn from the targets' query vocabulary, so only
    a referral pool that includes the late year can bridge the gap.
    """
    docs = []
    queries = []
    qrels = []
    for i in range(n_targets):
        did = f"t{i:03d}"
        own = " ".join(f"target{i:03d}w{j}" for j in range(6))
        docs.append(doc_row(did, title="", body=own, year=2016))
        qid = f"q{i:03d}"
        queries.append(
            {"id": qid, "text": " ".join(f"q{i:03d}w{j}" for j in range(4)), "year": 2020}
        )
        qrels.append((qid, did, 1))
    for i in range(n_targets):
        target = f"t{i:03d}"
        body = f"filler{i:03d} text here (CITE:{target}) done."
        start = body.index(f"(CITE:{target})")
        docs.append(
            doc_row(
                f"e{i:03d}",
                body=body,
                year=early_year,
                links=[(start, start + len(f"(CITE:{target})"), target, "citation")],
            )
        )
    n_late = int(n_targets * late_fraction)
    for i in range(n_late):
        target = f"t{i:03d}"
        qwords = " ".join(f"q{i:03d}w{j}" for j in range(4))
        body = f"{qwords} describes (CITE:{target}) nicely."
        start = body.index(f"(CITE:{target})")
        docs.append(
            doc_row(
                f"l{i:03d}",
                body=body,
                year=late_year,
                links=[(start, start + len(f"(CITE:{target})"), target, "citation")],
            )
        )
    docs_path = write_jsonl(tmp_path / "docs.jsonl", docs)
    queries_path = write_jsonl(tmp_path / "queries.jsonl", queries)
    qrels_path = write_qrels_tsv(tmp_path / "qrels.tsv", qrels)
    return docs_path, queries_path, qrels_path


# ---------------------------------------------------------------------------
# synthetic embeddings (independent writer: struct only, no refaug imports)


def synthetic_vector(text: str, seed: int, dim: int) -> np.ndarray:
    """Seeded random unit vector, a pure function of (seed, text)."""
    digest = hashlib.sha256(seed.to_bytes(8, "little", signed=True) + text.encode("utf-8"))
    rng = np.random.default_rng(int.from_bytes(digest.digest()[:8], "little"))
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def write_embedding_file(
    path: Path, dim: int, entries: list[tuple[str, np.ndarray]], label: str = "synthetic"
) -> Path:
    """RAREMB01 writer built from the documented layout, independent of the
    library's own writer."""
    label_bytes = label.encode("utf-8")
    with path.open("wb") as fh:
        fh.write(b"RAREMB01")
        fh.write(struct.pack("<I", dim))
        fh.write(struct.pack("<Q", len(entries)))
        fh.write(struct.pack("<H", len(label_bytes)))
        fh.write(label_bytes)
        for key, vec in entries:
            key_bytes = key.encode("utf-8")
            fh.write(struct.pack("<H", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(struct.pack(f"<{dim}f", *np.asarray(vec, dtype=np.float32)))
    return path


def embedding_file_for_manifest(path: Path, entries, seed: int, dim: int) -> Path:
    """Encode manifest entries with the synthetic unit-vector scheme."""
    return write_embedding_file(
        path, dim, [(e.key, synthetic_vector(e.text, seed, dim)) for e in entries]
    )


# ---------------------------------------------------------------------------
# naive reference implementations (oracles)


def naive_recall(ranked_ids: list[str], relevant: set[str], k: int) -> float:
    hits = len([d for d in ranked_ids[:k] if d in relevant])
    return hits / len(relevant)


def naive_mrr(ranked_ids: list[str], relevant: set[str], k: int) -> float:
    for i, did in enumerate(ranked_ids[:k]):
        if did in relevant:
            return 1.0 / (i + 1)
    return 0.0


def naive_ndcg(ranked_ids: list[str], grades: dict[str, int], k: int) -> float:
    dcg = 0.0
    for i, did in enumerate(ranked_ids[:k]):
        dcg += (2 ** grades.get(did, 0) - 1) / math.log2(i + 2)
    ideal = sorted(grades.values(), reverse=True)[:k]
    idcg = 0.0
    for i, g in enumerate(ideal):
        idcg += (2 ** g - 1) / math.log2(i + 2)
    return dcg / idcg if idcg > 0 else 0.0


def naive_bm25_topk(index, params, query_tokens, k):
    """Score every document with bm25_score and sort; the reference ranking."""
    from refaug import bm25_score

    scored = []
    for pos, did in enumerate(index.doc_ids):
        scored.append((did, bm25_score(index, params, query_tokens, pos)))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def naive_dense_topk(doc_ids, doc_views, query_vec, k, shortest_path=False):
    """Full-scan dot products with plain Python loops."""
    scored = []
    for did, views in zip(doc_ids, doc_views):
        if shortest_path:
            dots = [float(np.dot(v, query_vec)) for v in views]
            scored.append((did, max(dots)))
        else:
            scored.append((did, float(np.dot(views[0], query_vec))))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
