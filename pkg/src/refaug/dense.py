"""Dense retrieval over externally produced embeddings.

This package never runs an encoder.  Instead it writes a *manifest* naming
every text unit that needs a vector, an external tool encodes them into a
binary embedding file, and this module loads that file and builds an index
under one of the aggregation strategies:

* ``doc_only``      - one vector per document, f(d)
* ``concat``        - one vector per document, f(d's text + referral texts)
* ``mean``          - the arithmetic mean of f(d) and its referral vectors
* ``shortest_path`` - all views kept separate; a document scores as the
                      maximum dot product over its views

Similarity is the raw dot product; normalization is the embedding
provider's concern.  Search is exact brute force over all vectors.

Embedding file keys:
    ``doc:<doc id>``             index text of a document
    ``cat:<doc id>``             concatenated (augmented) index text
    ``ref:<target>:<text hash>`` one referral text (hash: first 16 hex chars
                                 of SHA-256 of the UTF-8 text)
    ``qry:<query id>``           query text

Binary layout (magic ``RAREMB01``) and the manifest JSON schema are
documented in docs/FORMATS.md.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .corpus import Corpus, DocId, index_text
from .errors import ParseError, UsageError, ValidationError
from .referral import ReferralPool, sample_referrals
from .sparse import augment_concat

logger = logging.getLogger(__name__)

MAGIC_EMBEDDINGS = b"RAREMB01"
MAGIC_DENSE_INDEX = b"RARDIDX1"

STRATEGIES = ("doc_only", "concat", "mean", "shortest_path")


def doc_key(doc_id: DocId) -> str:
    return f"doc:{doc_id}"


def cat_key(doc_id: DocId) -> str:
    return f"cat:{doc_id}"


def qry_key(query_id: str) -> str:
    return f"qry:{query_id}"


def ref_key(target: DocId, text: str) -> str:
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
    return f"ref:{target}:{digest}"


@dataclass(eq=False)
class EmbeddingSet:
    """Vectors keyed by text-unit key, all of one dimensionality."""

    dim: int
    model_label: str = ""
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.model_label == other.model_label
            and self.vectors.keys() == other.vectors.keys()
            and all(np.array_equal(v, other.vectors[k]) for k, v in self.vectors.items())
        )

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, key: str) -> np.ndarray:
        try:
            return self.vectors[key]
        except KeyError:
            raise ValidationError(f"no embedding for key {key!r}") from None

    def add(self, key: str, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.dim,):
            raise ValidationError(
                f"key {key!r}: expected {self.dim} components, got {vector.shape}"
            )
        if not np.all(np.isfinite(vector)):
            raise ValidationError(f"key {key!r}: non-finite component")
        if key in self.vectors:
            raise ValidationError(f"duplicate embedding key {key!r}")
        self.vectors[key] = vector


def write_embeddings(
    path: str | Path,
    dim: int,
    entries: Iterable[tuple[str, Sequence[float]]],
    model_label: str = "",
) -> int:
    """Write the RAREMB01 binary format; returns the record count."""
    entries = list(entries)
    label = model_label.encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC_EMBEDDINGS)
        fh.write(struct.pack("<IQH", dim, len(entries), len(label)))
        fh.write(label)
        for key, vector in entries:
            vec = np.asarray(vector, dtype=np.float32)
            if vec.shape != (dim,):
                raise ValidationError(
                    f"key {key!r}: expected {dim} components, got {vec.shape}"
                )
            data = key.encode("utf-8")
            fh.write(struct.pack("<H", len(data)))
            fh.write(data)
            fh.write(vec.astype("<f4").tobytes())
    return len(entries)


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ParseError(f"unexpected end of file while reading {what}")
    return data


def load_embeddings(path: str | Path) -> EmbeddingSet:
    """Load a RAREMB01 file, validating dimensions, finiteness, key uniqueness.

    Raises:
        ParseError: wrong magic, truncated records.
        ValidationError: non-finite component or duplicate key (named).
    """
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(MAGIC_EMBEDDINGS))
        if magic != MAGIC_EMBEDDINGS:
            raise ParseError(f"not an embedding file (magic {magic!r})", path=str(path))
        dim, count, label_len = struct.unpack("<IQH", _read_exact(fh, 14, "header"))
        if dim < 1:
            raise ValidationError(f"{path}: header dim must be >= 1, got {dim}")
        label = _read_exact(fh, label_len, "model label").decode("utf-8")
        embeddings = EmbeddingSet(dim=dim, model_label=label)
        for i in range(count):
            (key_len,) = struct.unpack("<H", _read_exact(fh, 2, f"record {i} key length"))
            key = _read_exact(fh, key_len, f"record {i} key").decode("utf-8")
            raw = fh.read(4 * dim)
            if len(raw) != 4 * dim:
                raise ParseError(
                    f"record for key {key!r} has {len(raw) // 4} of {dim} components",
                    path=str(path),
                )
            vector = np.frombuffer(raw, dtype="<f4").astype(np.float64)
            embeddings.add(key, vector)
        if fh.read(1):
            raise ParseError("trailing bytes after last record", path=str(path))
    return embeddings


@dataclass(frozen=True)
class ViewScore:
    """A scored document; ``best_view`` indexes the maximizing view for the
    shortest-path strategy and is None otherwise."""

    doc: DocId
    score: float
    best_view: int | None = None


@dataclass(eq=False)
class DenseIndex:
    """Per-document view vectors under one aggregation strategy.

    ``doc_only``, ``concat`` and ``mean`` store exactly one view per
    document; ``shortest_path`` stores the document view followed by its
    sampled referral views.  ``view_keys`` names each view with its
    embedding key for interpretability.
    """

    strategy: str
    dim: int
    doc_ids: list[DocId] = field(default_factory=list)
    views: list[np.ndarray] = field(default_factory=list)  # per doc: (V, dim)
    view_keys: list[list[str]] = field(default_factory=list)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.strategy!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseIndex):
            return NotImplemented
        return (
            self.strategy == other.strategy
            and self.dim == other.dim
            and self.doc_ids == other.doc_ids
            and self.view_keys == other.view_keys
            and len(self.views) == len(other.views)
            and all(np.array_equal(a, b) for a, b in zip(self.views, other.views))
        )

    def vector_for(self, pos: int) -> np.ndarray:
        """The single scoring vector of a non-shortest-path entry."""
        return self.views[pos][0]


def aggregate_mean(doc_vec: np.ndarray, referral_vecs: Sequence[np.ndarray]) -> np.ndarray:
    """Componentwise mean of the document vector and its referral vectors."""
    doc_vec = np.asarray(doc_vec, dtype=np.float64)
    total = doc_vec.copy()
    for vec in referral_vecs:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != doc_vec.shape:
            raise ValidationError(
                f"dimension mismatch: {vec.shape} vs {doc_vec.shape}"
            )
        total += vec
    return total / (len(referral_vecs) + 1)


def score_shortest_path(
    query_vec: np.ndarray,
    views: np.ndarray,
    doc: DocId = "",
    literal_min: bool = False,
) -> ViewScore:
    """Best single-view dot product between a query and a document's views.

    The maximizing view wins (minimum distance equals maximum similarity);
    ties go to the lowest view index.  ``literal_min`` flips the aggregation
    to the minimum over views, kept as a debugging variant for comparison.
    """
    views = np.atleast_2d(np.asarray(views, dtype=np.float64))
    if views.shape[0] == 0:
        raise ValidationError("shortest-path scoring requires at least one view")
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if views.shape[1] != query_vec.shape[0]:
        raise ValidationError(
            f"dimension mismatch: query {query_vec.shape[0]}, views {views.shape[1]}"
        )
    # Dot each row separately: a matrix-vector product can differ from the
    # row-wise dot by an ulp, which would break the exact guarantee that the
    # multi-view score never drops below the plain document score.
    dots = np.array([np.dot(row, query_vec) for row in views])
    best = int(np.argmin(dots) if literal_min else np.argmax(dots))
    return ViewScore(doc=doc, score=float(dots[best]), best_view=best)


def build_dense_index(
    doc_ids: Sequence[DocId],
    embeddings: EmbeddingSet,
    pool: ReferralPool | None,
    strategy: str = "doc_only",
    max_referrals: int = 30,
    seed: int = 0,
) -> DenseIndex:
    """Assemble a dense index for the given documents.

    Referrals are sampled per document exactly as at manifest time, so the
    required ``ref:`` keys line up with what the provider encoded.  Any
    missing key is a hard error listing all missing keys; silent gaps would
    corrupt comparisons between strategies.
    """
    if strategy not in STRATEGIES:
        raise ValidationError(f"unknown strategy {strategy!r}")
    pool = pool or ReferralPool()
    missing: set[str] = set()
    planned: list[tuple[DocId, list[str]]] = []
    for did in doc_ids:
        # One key per view; a referral sampled twice with identical text
        # repeats its key, which is deliberate for the mean formula.
        if strategy == "concat":
            keys = [cat_key(did)]
        elif strategy == "doc_only":
            keys = [doc_key(did)]
        else:
            keys = [doc_key(did)]
            keys += [
                ref_key(did, r.text)
                for r in sample_referrals(pool, did, max_referrals, seed)
            ]
        planned.append((did, keys))
        missing.update(k for k in keys if k not in embeddings)
    if missing:
        raise ValidationError("missing embedding keys: " + ", ".join(sorted(missing)))

    index = DenseIndex(strategy=strategy, dim=embeddings.dim)
    for did, keys in planned:
        vectors = [embeddings.get(k) for k in keys]
        if strategy == "mean":
            views = np.vstack([aggregate_mean(vectors[0], vectors[1:])])
            keys = [doc_key(did)]
        else:
            views = np.vstack(vectors)
        index.doc_ids.append(did)
        index.views.append(views)
        index.view_keys.append(keys)
    return index


def search_dense(
    index: DenseIndex,
    query_vec: np.ndarray,
    k: int,
    literal_min: bool = False,
) -> list[ViewScore]:
    """Exact top-k by strategy score, ties broken by ascending doc id."""
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (index.dim,):
        raise ValidationError(
            f"query dimension {query_vec.shape} does not match index dim {index.dim}"
        )
    scored: list[ViewScore] = []
    for pos, did in enumerate(index.doc_ids):
        if index.strategy == "shortest_path":
            scored.append(score_shortest_path(query_vec, index.views[pos], did, literal_min))
        else:
            score = float(np.dot(index.views[pos][0], query_vec))
            scored.append(ViewScore(doc=did, score=score))
    scored.sort(key=lambda vs: (-vs.score, vs.doc))
    return scored[:k]


def save_dense_index(index: DenseIndex, path: str | Path) -> None:
    """Serialize to the RARDIDX1 binary layout (see docs/FORMATS.md)."""
    with Path(path).open("wb") as fh:
        fh.write(MAGIC_DENSE_INDEX)
        strategy = index.strategy.encode("utf-8")
        fh.write(struct.pack("<H", len(strategy)))
        fh.write(strategy)
        fh.write(struct.pack("<IQ", index.dim, len(index.doc_ids)))
        for pos, did in enumerate(index.doc_ids):
            data = did.encode("utf-8")
            fh.write(struct.pack("<H", len(data)))
            fh.write(data)
            views = index.views[pos]
            fh.write(struct.pack("<I", views.shape[0]))
            for v, key in enumerate(index.view_keys[pos]):
                kdata = key.encode("utf-8")
                fh.write(struct.pack("<H", len(kdata)))
                fh.write(kdata)
                fh.write(np.asarray(views[v], dtype="<f8").tobytes())


def load_dense_index(path: str | Path) -> DenseIndex:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(MAGIC_DENSE_INDEX))
        if magic != MAGIC_DENSE_INDEX:
            raise ParseError(f"not a dense index file (magic {magic!r})", path=str(path))
        (slen,) = struct.unpack("<H", _read_exact(fh, 2, "strategy"))
        strategy = _read_exact(fh, slen, "strategy").decode("utf-8")
        dim, n_docs = struct.unpack("<IQ", _read_exact(fh, 12, "header"))
        index = DenseIndex(strategy=strategy, dim=dim)
        for _ in range(n_docs):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, "doc id"))
            did = _read_exact(fh, id_len, "doc id").decode("utf-8")
            (n_views,) = struct.unpack("<I", _read_exact(fh, 4, "view count"))
            if n_views < 1:
                raise ValidationError(f"{path}: document {did!r} has no views")
            keys = []
            rows = []
            for _ in range(n_views):
                (klen,) = struct.unpack("<H", _read_exact(fh, 2, "view key"))
                keys.append(_read_exact(fh, klen, "view key").decode("utf-8"))
                raw = _read_exact(fh, 8 * dim, f"view vector of {did!r}")
                rows.append(np.frombuffer(raw, dtype="<f8"))
            index.doc_ids.append(did)
            index.views.append(np.vstack(rows))
            index.view_keys.append(keys)
        if fh.read(1):
            raise ParseError("trailing bytes after last document", path=str(path))
    return index


@dataclass(frozen=True)
class ManifestEntry:
    key: str
    text: str


def build_manifest(
    corpus: Corpus,
    pool: ReferralPool | None,
    strategy: str = "doc_only",
    max_referrals: int = 30,
    seed: int = 0,
    separator: str = " ",
) -> list[ManifestEntry]:
    """Every (key, text) pair an embedding provider must encode for one run.

    Documents are enumerated in sorted-id order; referral keys follow their
    document in sample order; query keys come last.  Identical referral
    texts for one target share a key and appear once.
    """
    if strategy not in STRATEGIES:
        raise ValidationError(f"unknown strategy {strategy!r}")
    pool = pool or ReferralPool()
    entries: list[ManifestEntry] = []
    seen: set[str] = set()

    def push(key: str, text: str) -> None:
        if key in seen:
            return
        if not text:
            raise ValidationError(f"manifest entry {key!r} has empty text")
        seen.add(key)
        entries.append(ManifestEntry(key=key, text=text))

    for did in sorted(corpus.documents):
        doc = corpus.documents[did]
        base = index_text(doc)
        if strategy == "concat":
            sampled = sample_referrals(pool, did, max_referrals, seed)
            push(cat_key(did), augment_concat(base, sampled, separator))
        else:
            push(doc_key(did), base)
            if strategy in ("mean", "shortest_path"):
                for r in sample_referrals(pool, did, max_referrals, seed):
                    push(ref_key(did, r.text), r.text)
    for query in corpus.queries:
        push(qry_key(query.id), query.text)
    return entries


def save_manifest(
    entries: Sequence[ManifestEntry],
    path: str | Path,
    strategy: str,
    max_referrals: int,
    seed: int,
) -> None:
    payload = {
        "format": "refaug-manifest-v1",
        "strategy": strategy,
        "max_referrals": max_referrals,
        "seed": seed,
        "count": len(entries),
        "entries": [{"key": e.key, "text": e.text} for e in entries],
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            payload = json.load(fh)
        raw_entries = payload["entries"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"invalid manifest: {exc}", path=str(path)) from exc
    entries = []
    seen: set[str] = set()
    for i, obj in enumerate(raw_entries):
        try:
            entry = ManifestEntry(key=str(obj["key"]), text=obj["text"])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"invalid manifest entry {i}: {exc}", path=str(path)) from exc
        if entry.key in seen:
            raise ValidationError(f"{path}: duplicate manifest key {entry.key!r}")
        if not isinstance(entry.text, str) or not entry.text:
            raise ValidationError(f"{path}: entry {entry.key!r} has empty text")
        seen.add(entry.key)
        entries.append(entry)
    return entries
