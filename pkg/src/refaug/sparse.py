"""Inverted index, BM25 scoring, and concatenation augmentation.

The index is built from scratch: tokenization splits on any
non-alphanumeric character, postings lists per term, and BM25 with the
plus-one smoothed idf

    idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)

which is nonnegative for every df <= N.  That matters here because referral
concatenation makes common terms even more common, and the unsmoothed idf
would go negative for terms appearing in more than half the corpus.

Concatenation augmentation appends sampled referral texts to a document's
index-time text; queries are never expanded.

Indices persist to a single little-endian binary file (magic ``RARSIDX1``);
the exact layout is documented in docs/FORMATS.md and covered by a
round-trip test.
"""

from __future__ import annotations

import bisect
import logging
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

from .corpus import DocId
from .errors import ParseError, UsageError, ValidationError
from .referral import Referral

logger = logging.getLogger(__name__)

MAGIC_SPARSE = b"RARSIDX1"

# Alphanumeric runs, Unicode-aware, underscore excluded.
_ALNUM_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class Tokenizer:
    """Deterministic tokenizer: lowercase, split on non-alphanumerics, drop
    stopwords.  Tokenizing ``a + " " + b`` equals tokenizing ``a`` then ``b``."""

    lowercase: bool = True
    stopwords: frozenset[str] = frozenset()

    def tokenize(self, text: str) -> list[str]:
        if self.lowercase:
            text = text.lower()
        tokens = _ALNUM_RE.findall(text)
        if self.stopwords:
            tokens = [t for t in tokens if t not in self.stopwords]
        return tokens


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValidationError(f"k1 must be > 0, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ValidationError(f"b must be in [0, 1], got {self.b}")


@dataclass
class InvertedIndex:
    """Postings keyed by term; document order fixes the integer positions."""

    postings: dict[str, list[tuple[int, int]]]  # term -> [(doc position, tf)]
    doc_lengths: list[int]
    doc_ids: list[DocId]
    tokenizer: Tokenizer = field(default_factory=Tokenizer)

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    @property
    def avg_doc_length(self) -> float:
        if not self.doc_lengths:
            return 0.0
        return sum(self.doc_lengths) / len(self.doc_lengths)

    def position_of(self, doc_id: DocId) -> int:
        try:
            return self.doc_ids.index(doc_id)
        except ValueError:
            raise KeyError(doc_id) from None


def augment_concat(
    doc_text: str,
    referrals: Sequence[Referral | str],
    separator: str = " ",
    doc_repeat: int = 1,
) -> str:
    """Concatenate a document's text with its referral texts, in sample order.

    ``doc_repeat`` repeats the original text to up-weight it relative to the
    referrals; the default of 1 weights them equally.
    """
    if doc_repeat < 1:
        raise ValidationError("doc_repeat must be >= 1")
    parts = [doc_text] * doc_repeat
    for r in referrals:
        parts.append(r.text if isinstance(r, Referral) else r)
    return separator.join(parts)


def build_index(texts: Iterable[tuple[DocId, str]], tokenizer: Tokenizer | None = None) -> InvertedIndex:
    """Build an inverted index over (doc id, text) pairs, preserving order.

    Raises:
        ValidationError: a document id occurs twice.
    """
    tokenizer = tokenizer or Tokenizer()
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    doc_ids: list[DocId] = []
    seen: set[DocId] = set()
    for pos, (doc_id, text) in enumerate(texts):
        if doc_id in seen:
            raise ValidationError(f"duplicate document id {doc_id!r}")
        seen.add(doc_id)
        doc_ids.append(doc_id)
        tokens = tokenizer.tokenize(text)
        doc_lengths.append(len(tokens))
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((pos, tf))
    return InvertedIndex(
        postings=postings, doc_lengths=doc_lengths, doc_ids=doc_ids, tokenizer=tokenizer
    )


def _idf(index: InvertedIndex, term: str) -> float:
    df = len(index.postings.get(term, ()))
    if df == 0:
        return 0.0
    n = index.doc_count
    return math.log((n - df + 0.5) / (df + 0.5) + 1.0)


def _contribution(index: InvertedIndex, params: Bm25Params, idf: float, tf: int, pos: int) -> float:
    avg = index.avg_doc_length
    norm = index.doc_lengths[pos] / avg if avg > 0 else 0.0
    denom = tf + params.k1 * (1.0 - params.b + params.b * norm)
    return idf * (tf * (params.k1 + 1.0)) / denom


def bm25_score(
    index: InvertedIndex, params: Bm25Params, query_tokens: Sequence[str], doc: int
) -> float:
    """BM25 score of one document position against pre-tokenized query terms.

    Terms absent from the index contribute zero; a term repeated in the
    query contributes once per occurrence.
    """
    if not 0 <= doc < index.doc_count:
        raise UsageError(f"document position {doc} out of range (N={index.doc_count})")
    score = 0.0
    for token in query_tokens:
        plist = index.postings.get(token)
        if not plist:
            continue
        # Postings are sorted by document position.
        i = bisect.bisect_left(plist, doc, key=lambda p: p[0])
        if i < len(plist) and plist[i][0] == doc:
            idf = _idf(index, token)
            score += _contribution(index, params, idf, plist[i][1], doc)
    return score


def search_sparse(
    index: InvertedIndex,
    params: Bm25Params,
    tokenizer: Tokenizer,
    query: str,
    k: int,
) -> list[tuple[DocId, float]]:
    """Exact BM25 top-k: highest score first, ties broken by ascending doc id.

    Zero-scoring documents (no query term at all) are appended in id order
    only when fewer than k documents match.  An empty token list after
    tokenization yields an empty result with a warning.
    """
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    query_tokens = tokenizer.tokenize(query)
    if not query_tokens:
        logger.warning("query %r tokenized to nothing; returning no results", query)
        return []
    # Accumulate per document in query-token order: the float additions are
    # then identical to bm25_score's, so scores agree bit-for-bit.
    scores: dict[int, float] = {}
    for token in query_tokens:
        plist = index.postings.get(token)
        if not plist:
            continue
        idf = _idf(index, token)
        for pos, tf in plist:
            scores[pos] = scores.get(pos, 0.0) + _contribution(index, params, idf, tf, pos)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], index.doc_ids[item[0]]))
    result = [(index.doc_ids[pos], score) for pos, score in ranked[:k]]
    if len(result) < k:
        matched = set(scores)
        zeros = sorted(
            doc_id for pos, doc_id in enumerate(index.doc_ids) if pos not in matched
        )
        for doc_id in zeros[: k - len(result)]:
            result.append((doc_id, 0.0))
    return result


def _write_str(fh: BinaryIO, s: str) -> None:
    data = s.encode("utf-8")
    if len(data) > 0xFFFF:
        raise ValidationError(f"string too long to serialize ({len(data)} bytes)")
    fh.write(struct.pack("<H", len(data)))
    fh.write(data)


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ParseError(f"unexpected end of file while reading {what}")
    return data


def _read_str(fh: BinaryIO, what: str) -> str:
    (length,) = struct.unpack("<H", _read_exact(fh, 2, what))
    return _read_exact(fh, length, what).decode("utf-8")


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Serialize to the RARSIDX1 binary layout (see docs/FORMATS.md).

    Terms are written in sorted order, so save -> load -> save is
    byte-identical.
    """
    with Path(path).open("wb") as fh:
        fh.write(MAGIC_SPARSE)
        fh.write(struct.pack("<B", 1 if index.tokenizer.lowercase else 0))
        stopwords = sorted(index.tokenizer.stopwords)
        fh.write(struct.pack("<I", len(stopwords)))
        for word in stopwords:
            _write_str(fh, word)
        fh.write(struct.pack("<Q", index.doc_count))
        fh.write(struct.pack("<d", index.avg_doc_length))
        for doc_id, length in zip(index.doc_ids, index.doc_lengths):
            _write_str(fh, doc_id)
            fh.write(struct.pack("<I", length))
        terms = sorted(index.postings)
        fh.write(struct.pack("<Q", len(terms)))
        for term in terms:
            _write_str(fh, term)
            plist = index.postings[term]
            fh.write(struct.pack("<I", len(plist)))
            for pos, tf in plist:
                fh.write(struct.pack("<II", pos, tf))


def load_index(path: str | Path) -> InvertedIndex:
    """Read a RARSIDX1 file back into an InvertedIndex.

    Raises:
        ParseError: wrong magic or truncated file.
    """
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(MAGIC_SPARSE))
        if magic != MAGIC_SPARSE:
            raise ParseError(f"not a sparse index file (magic {magic!r})", path=str(path))
        (lowercase,) = struct.unpack("<B", _read_exact(fh, 1, "tokenizer flags"))
        (n_stop,) = struct.unpack("<I", _read_exact(fh, 4, "stopword count"))
        stopwords = frozenset(_read_str(fh, "stopword") for _ in range(n_stop))
        (n_docs,) = struct.unpack("<Q", _read_exact(fh, 8, "document count"))
        _read_exact(fh, 8, "avg_doc_length")  # derived; recomputed from lengths
        doc_ids: list[DocId] = []
        doc_lengths: list[int] = []
        for _ in range(n_docs):
            doc_ids.append(_read_str(fh, "doc id"))
            (length,) = struct.unpack("<I", _read_exact(fh, 4, "doc length"))
            doc_lengths.append(length)
        (n_terms,) = struct.unpack("<Q", _read_exact(fh, 8, "term count"))
        postings: dict[str, list[tuple[int, int]]] = {}
        for _ in range(n_terms):
            term = _read_str(fh, "term")
            (n_post,) = struct.unpack("<I", _read_exact(fh, 4, "postings length"))
            plist = []
            for _ in range(n_post):
                pos, tf = struct.unpack("<II", _read_exact(fh, 8, "posting"))
                plist.append((pos, tf))
            postings[term] = plist
        trailing = fh.read(1)
        if trailing:
            raise ParseError("trailing bytes after postings", path=str(path))
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        doc_ids=doc_ids,
        tokenizer=Tokenizer(lowercase=bool(lowercase), stopwords=stopwords),
    )
