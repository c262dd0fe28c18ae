#!/usr/bin/env python3
"""Training-free temporal updates: a newer referral pool, same index code.

Year one, documents are cited with bland boilerplate.  Year two, the
community starts describing a third of them with exactly the words future
queries will use.  Nothing is retrained; we only move the pool's year
cutoff and rebuild the index text.

Run:  python demos/temporal_update.py
"""

import json
import tempfile
from pathlib import Path

from refaug import (
    ExperimentConfig,
    ExtractionConfig,
    extract_referrals,
    filter_pool,
    load_corpus,
    run_experiment,
    save_pool,
)

workdir = Path(tempfile.mkdtemp(prefix="refaug-demo-"))
N = 60
docs, queries, qrels = [], [], []

for i in range(N):
    docs.append(
        {"id": f"t{i:02d}", "title": "", "body": f"subject{i:02d} internal notation",
         "year": 2016, "links": []}
    )
    queries.append({"id": f"q{i:02d}", "text": f"buzz{i:02d} phrasing", "year": 2020})
    qrels.append(f"q{i:02d}\tt{i:02d}\t1")


def citer(cid, target, sentence, year):
    body = f"{sentence} (CITE:{target})."
    start = body.index("(CITE:")
    return {
        "id": cid, "title": "", "body": body, "year": year,
        "links": [{"start": start, "end": body.index(")", start) + 1,
                   "target": target, "kind": "citation"}],
    }


# 2018: every document cited, but with generic words.
for i in range(N):
    docs.append(citer(f"e{i:02d}", f"t{i:02d}", f"standard reference number {i}", 2018))
# 2019: a third of the documents picked up the query-side vocabulary.
for i in range(N // 3):
    docs.append(citer(f"l{i:02d}", f"t{i:02d}", f"buzz{i:02d} phrasing everywhere", 2019))

(workdir / "docs.jsonl").write_text("\n".join(json.dumps(d) for d in docs) + "\n")
(workdir / "queries.jsonl").write_text("\n".join(json.dumps(q) for q in queries) + "\n")
(workdir / "qrels.tsv").write_text("\n".join(qrels) + "\n")

corpus = load_corpus(workdir / "docs.jsonl")
pool = extract_referrals(corpus, ExtractionConfig(unit="sentence"))
save_pool(pool, workdir / "pool.jsonl")
print(f"pool: {len(pool)} referrals total, "
      f"{len(filter_pool(pool, 2018))} with source year <= 2018")


def recall_with_cutoff(cutoff):
    config = ExperimentConfig(
        docs=str(workdir / "docs.jsonl"),
        queries=str(workdir / "queries.jsonl"),
        qrels=str(workdir / "qrels.tsv"),
        retriever="sparse",
        strategy="concat",
        referrals=str(workdir / "pool.jsonl"),
        pool_cutoff_year=cutoff,
        candidate_cutoff_year=2018,  # the 2019 citers are never indexed
        ks=[10],
        seed=0,
    )
    return run_experiment(config).metrics["recall@10"]["mean"]


for cutoff in (2018, 2019):
    print(f"referrals up to {cutoff}: recall@10 = {recall_with_cutoff(cutoff):.3f}")

print(f"\n(work dir: {workdir})")
