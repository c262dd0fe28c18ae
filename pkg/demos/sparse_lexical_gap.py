#!/usr/bin/env python3
"""How referral concatenation closes a lexical gap that defeats plain BM25.

We build a small corpus where every document describes itself in its own
private vocabulary, while queries use the words *other* authors use when
citing it.  Plain BM25 has no term overlap to work with; concatenating the
citing sentences into the index text fixes that without touching the
queries or training anything.

Run:  python demos/sparse_lexical_gap.py
"""

import json
import tempfile
from pathlib import Path

from refaug import (
    ExperimentConfig,
    ExtractionConfig,
    augment_concat,
    extract_referrals,
    load_corpus,
    run_experiment,
    sample_referrals,
    save_pool,
)

N_DOCS = 40
workdir = Path(tempfile.mkdtemp(prefix="refaug-demo-"))

# --- synthesize the corpus ---------------------------------------------------
# Document i is about "topicNNN ..." but everyone cites it as "jargonNNN ...".
# Documents i-1 and i-2 each carry a citing sentence (and link span) for
# document i, so every document collects two referrals.
docs, queries, qrels = [], [], []
for i in range(N_DOCS):
    own_text = f"topic{i:03d} methods results discussion"
    sentences = [own_text + "."]
    links = []
    offset = len(sentences[0]) + 1
    for hop, style in ((1, "everyone uses"), (2, "in survey papers")):
        cited = (i + hop) % N_DOCS
        citing = f"jargon{cited:03d} terminology {style} (CITE:d{cited:03d})."
        start = offset + citing.index("(CITE:")
        links.append(
            {"start": start, "end": offset + citing.index(")", citing.index("(CITE:")) + 1,
             "target": f"d{cited:03d}", "kind": "citation"}
        )
        sentences.append(citing)
        offset += len(citing) + 1
    docs.append(
        {
            "id": f"d{i:03d}",
            "title": f"Paper {i:03d}",
            "body": " ".join(sentences),
            "year": 2018,
            "links": links,
        }
    )
    queries.append({"id": f"q{i:03d}", "text": f"jargon{i:03d} terminology", "year": 2019})
    qrels.append(f"q{i:03d}\td{i:03d}\t1")

(workdir / "docs.jsonl").write_text("\n".join(json.dumps(d) for d in docs) + "\n")
(workdir / "queries.jsonl").write_text("\n".join(json.dumps(q) for q in queries) + "\n")
(workdir / "qrels.tsv").write_text("\n".join(qrels) + "\n")

# --- extract referrals --------------------------------------------------------
corpus = load_corpus(workdir / "docs.jsonl")
pool = extract_referrals(corpus, ExtractionConfig(unit="sentence"))
save_pool(pool, workdir / "pool.jsonl")
print(f"extracted {len(pool)} referrals "
      f"(dangling skipped: {pool.stats.skipped_dangling})")

example = pool.referrals_for("d001")[0]
print(f"\none referral for d001, from {example.source}:")
print(f"  {example.text!r}")

# What the index actually sees for d001 under each strategy:
doc = corpus.documents["d001"]
sampled = sample_referrals(pool, "d001", 30, seed=0)
print(f"\nindex text (doc_only): {doc.title + ' ' + doc.body!r}")
print(f"index text (concat):   {augment_concat(doc.title + ' ' + doc.body, sampled)!r}")

# --- evaluate both strategies --------------------------------------------------
def evaluate(strategy, referrals=None):
    config = ExperimentConfig(
        docs=str(workdir / "docs.jsonl"),
        queries=str(workdir / "queries.jsonl"),
        qrels=str(workdir / "qrels.tsv"),
        retriever="sparse",
        strategy=strategy,
        referrals=str(referrals) if referrals else None,
        ks=[1, 10],
        seed=0,
    )
    return run_experiment(config)

plain = evaluate("doc_only")
augmented = evaluate("concat", workdir / "pool.jsonl")

print(f"\n{'':14s}{'recall@1':>10s}{'recall@10':>11s}{'mrr@10':>9s}")
for name, report in (("doc_only", plain), ("+ referrals", augmented)):
    print(
        f"{name:14s}"
        f"{report.metrics['recall@1']['mean']:10.3f}"
        f"{report.metrics['recall@10']['mean']:11.3f}"
        f"{report.metrics['mrr@10']['mean']:9.3f}"
    )

print(f"\n(work dir: {workdir})")
