"""Referral extraction and pool management.

A referral is a masked, windowed passage taken from a *source* document at
the point where it cites or hyperlinks a *target* document.  Referrals act
as alternate index-time views of the target: other authors' descriptions of
a document often match query phrasing far better than the document itself.

Extraction is driven by the link spans annotated on each document.  The
citation marker itself is replaced by a mask token so the surrounding prose,
not the marker surface form, carries the signal.  Two extraction units are
supported:

* ``sentence`` - the sentence containing the (masked) link
* ``window``   - a fixed-size whitespace-token window centered on the mask

Pools are serializable to referrals-jsonl (one object per line) so an
updated pool can ship as a file and be swapped in without touching the
corpus or retraining anything.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, DocId, LinkSpan
from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_MASK_TOKEN = "[MASK]"
DEFAULT_WINDOW_TOKENS = 200
DEFAULT_MAX_REFERRALS = 30

# Trailing abbreviations that do not end a sentence.  Deliberately short and
# deterministic; segmentation quality beyond this is not a goal.
ABBREVIATIONS = frozenset(
    ["e.g.", "i.e.", "etc.", "cf.", "al.", "fig.", "vs.", "no.", "dr.", "mr.", "mrs.", "ms.", "prof."]
)

_TOKEN_RE = re.compile(r"\S+")
_SENTENCE_END_RE = re.compile(r"[.!?](?=\s)")


@dataclass(frozen=True)
class Referral:
    """One masked passage from ``source`` describing ``target``."""

    target: DocId
    source: DocId
    text: str
    kind: str = "citation"
    year: int | None = None

    def validate(self) -> None:
        if not self.text:
            raise ValidationError("referral text must be nonempty")
        if self.target == self.source:
            raise ValidationError(f"self-referral for document {self.target!r}")


@dataclass
class ExtractionConfig:
    """Knobs for referral extraction and per-document sampling."""

    window_tokens: int = DEFAULT_WINDOW_TOKENS
    mask_token: str = DEFAULT_MASK_TOKEN
    unit: str = "window"  # "sentence" or "window"
    seed: int = 0
    max_referrals: int = DEFAULT_MAX_REFERRALS

    def __post_init__(self):
        if self.window_tokens < 1:
            raise ValidationError("window_tokens must be >= 1")
        if self.max_referrals < 1:
            raise ValidationError("max_referrals must be >= 1")
        if self.unit not in ("sentence", "window"):
            raise ValidationError(f"unknown extraction unit {self.unit!r}")

    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "window_tokens": self.window_tokens,
                "mask_token": self.mask_token,
                "unit": self.unit,
                "seed": self.seed,
                "max_referrals": self.max_referrals,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class ExtractionStats:
    extracted: int = 0
    deduplicated: int = 0
    skipped_dangling: int = 0
    skipped_self: int = 0
    skipped_empty: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "extracted": self.extracted,
            "deduplicated": self.deduplicated,
            "skipped_dangling": self.skipped_dangling,
            "skipped_self": self.skipped_self,
            "skipped_empty": self.skipped_empty,
        }


@dataclass
class ReferralPool:
    """Referrals grouped by target document, in a stable order.

    Group order is extraction order (sorted by source id, then span offset)
    or file order for pools loaded from disk.  ``provenance`` records where
    the pool came from and is excluded from equality.
    """

    by_target: dict[DocId, list[Referral]] = field(default_factory=dict)
    provenance: str = field(default="", compare=False)
    stats: ExtractionStats = field(default_factory=ExtractionStats, compare=False)

    def referrals_for(self, doc_id: DocId) -> list[Referral]:
        return self.by_target.get(doc_id, [])

    def __len__(self) -> int:
        return sum(len(group) for group in self.by_target.values())

    def add(self, referral: Referral) -> bool:
        """Append a referral unless its (source, text) already exists for the
        target.  Returns True when the referral was added."""
        referral.validate()
        group = self.by_target.setdefault(referral.target, [])
        for existing in group:
            if existing.source == referral.source and existing.text == referral.text:
                return False
        group.append(referral)
        return True


def mask_span(body: str, span: LinkSpan, mask_token: str = DEFAULT_MASK_TOKEN) -> str:
    """Replace the characters covered by ``span`` with the mask token."""
    span.validate(len(body))
    return body[: span.start] + mask_token + body[span.end :]


def _token_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def _token_index_at(spans: list[tuple[int, int]], offset: int) -> int:
    """Index of the whitespace token containing ``offset``, or the nearest one."""
    for i, (start, end) in enumerate(spans):
        if start <= offset < end:
            return i
        if offset < start:
            return i
    return len(spans) - 1


def extract_window(
    body: str,
    span: LinkSpan,
    window_tokens: int = DEFAULT_WINDOW_TOKENS,
    mask_token: str = DEFAULT_MASK_TOKEN,
) -> str:
    """Mask the span, then cut a window of whitespace tokens around the mask.

    The window ideally spans ``floor(w/2)`` tokens before the mask and
    ``ceil(w/2)`` tokens from the mask onward; at document boundaries the
    unused budget shifts to the other side, so the result always has exactly
    ``min(w, total_tokens)`` tokens.  Tokens are joined by single spaces.
    """
    if window_tokens < 1:
        raise ValidationError("window_tokens must be >= 1")
    masked = mask_span(body, span, mask_token)
    spans = _token_spans(masked)
    if not spans:
        return ""
    center = _token_index_at(spans, span.start)
    start = center - window_tokens // 2
    end = start + window_tokens
    if start < 0:
        start, end = 0, window_tokens
    if end > len(spans):
        end = len(spans)
        start = max(0, end - window_tokens)
    return " ".join(masked[s:e] for s, e in spans[start:end])


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Deterministic sentence segmentation: split after ``.``, ``!`` or ``?``
    followed by whitespace, unless the terminator ends a known abbreviation.

    Returns half-open character spans covering the whole text.
    """
    boundaries = []
    for m in _SENTENCE_END_RE.finditer(text):
        end = m.end()
        preceding = text[:end].rstrip()
        last_word = preceding.split()[-1].lower() if preceding.split() else ""
        # Strip wrapping punctuation like closing parens before the lookup.
        last_word = last_word.lstrip("([\"'")
        if last_word in ABBREVIATIONS:
            continue
        boundaries.append(end)
    spans = []
    start = 0
    for b in boundaries:
        spans.append((start, b))
        start = b
    if start < len(text):
        spans.append((start, len(text)))
    return spans


def extract_sentence(body: str, span: LinkSpan, mask_token: str = DEFAULT_MASK_TOKEN) -> str:
    """The sentence of the masked body that contains the masked link."""
    masked = mask_span(body, span, mask_token)
    for start, end in split_sentences(masked):
        if start <= span.start < end:
            return masked[start:end].strip()
    return masked.strip()


def extract_referrals(corpus: Corpus, config: ExtractionConfig) -> ReferralPool:
    """Walk every link span in the corpus and build the referral pool.

    Only links whose target is a document of ``corpus`` produce referrals;
    dangling targets and self-links are counted and skipped.  Exact
    duplicate (source, text) pairs per target are removed.  Documents are
    processed in sorted-id order so the pool is independent of ingestion
    order.
    """
    pool = ReferralPool(provenance=f"extract:{config.fingerprint()}")
    stats = pool.stats
    for source_id in sorted(corpus.documents):
        doc = corpus.documents[source_id]
        for span in sorted(doc.links, key=lambda s: (s.start, s.end, s.target)):
            if span.target not in corpus.documents:
                stats.skipped_dangling += 1
                continue
            if span.target == source_id:
                stats.skipped_self += 1
                continue
            if config.unit == "sentence":
                text = extract_sentence(doc.body, span, config.mask_token)
            else:
                text = extract_window(
                    doc.body, span, config.window_tokens, config.mask_token
                )
            if not text:
                stats.skipped_empty += 1
                continue
            referral = Referral(
                target=span.target,
                source=source_id,
                text=text,
                kind=span.kind,
                year=doc.year,
            )
            if pool.add(referral):
                stats.extracted += 1
            else:
                stats.deduplicated += 1
    if stats.skipped_dangling:
        logger.info("extract_referrals: skipped %d dangling link(s)", stats.skipped_dangling)
    return pool


def filter_pool(pool: ReferralPool, cutoff: int) -> ReferralPool:
    """Keep only referrals whose source year is known and <= cutoff."""
    filtered = ReferralPool(provenance=f"{pool.provenance}|cutoff<={cutoff}")
    dropped_missing = 0
    for target, group in pool.by_target.items():
        kept = [r for r in group if r.year is not None and r.year <= cutoff]
        dropped_missing += sum(1 for r in group if r.year is None)
        if kept:
            filtered.by_target[target] = kept
    if dropped_missing:
        logger.info("filter_pool: dropped %d referral(s) without source year", dropped_missing)
    return filtered


def _stable_doc_key(doc_id: DocId) -> int:
    digest = hashlib.sha256(doc_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def sample_referrals(
    pool: ReferralPool, doc_id: DocId, max_referrals: int, seed: int
) -> list[Referral]:
    """Up to ``max_referrals`` referrals for one document, in pool order.

    Sampling is uniform without replacement and deterministic: the RNG is
    keyed by the global seed XOR a stable hash of the document id, so each
    document samples independently and ingestion order does not matter.
    """
    if max_referrals < 1:
        raise ValidationError("max_referrals must be >= 1")
    group = pool.referrals_for(doc_id)
    if len(group) <= max_referrals:
        return list(group)
    rng = random.Random((seed ^ _stable_doc_key(doc_id)) & 0xFFFFFFFFFFFFFFFF)
    picked = rng.sample(range(len(group)), max_referrals)
    return [group[i] for i in sorted(picked)]


def save_pool(pool: ReferralPool, path: str | Path) -> None:
    """Write referrals-jsonl, targets sorted, group order preserved."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for target in sorted(pool.by_target):
            for r in pool.by_target[target]:
                obj = {
                    "target": r.target,
                    "source": r.source,
                    "text": r.text,
                    "kind": r.kind,
                    "year": r.year,
                }
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_pool(path: str | Path) -> ReferralPool:
    """Read referrals-jsonl; duplicate (source, text) pairs are dropped."""
    path = Path(path)
    pool = ReferralPool(provenance=f"file:{path.name}")
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                referral = Referral(
                    target=str(obj["target"]),
                    source=str(obj["source"]),
                    text=obj["text"],
                    kind=obj.get("kind", "citation"),
                    year=obj.get("year"),
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc
            try:
                pool.add(referral)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return pool
