"""Data model and line-delimited ingestion for documents, queries, and qrels.

A corpus is a set of retrievable documents, each optionally annotated with
outgoing link spans (citations or hyperlinks into other documents), plus the
queries and relevance judgments used for evaluation.  File formats:

* docs-jsonl: one ``{"id", "title", "body", "year", "links"}`` object per line
* queries-jsonl: one ``{"id", "text", "year"}`` object per line
* qrels-tsv: ``query_id<TAB>doc_id<TAB>grade`` with integer grade >= 0

Offsets in link spans are Unicode code-point offsets into ``body``, never
byte offsets.  Link targets may point outside the loaded corpus; such
dangling links are tolerated here and skipped (with a count) at referral
extraction time.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

LINK_KINDS = ("citation", "hyperlink")

DocId = str

# query id -> doc id -> relevance grade (>= 0)
Qrels = dict[str, dict[str, int]]


@dataclass(frozen=True)
class LinkSpan:
    """A half-open character range ``[start, end)`` in a document body that
    cites or hyperlinks another document."""

    start: int
    end: int
    target: DocId
    kind: str = "citation"

    def validate(self, body_len: int, context: str = "") -> None:
        if not (0 <= self.start < self.end <= body_len):
            raise ValidationError(
                f"{context}link span [{self.start}, {self.end}) out of bounds "
                f"for body of length {body_len}"
            )
        if self.kind not in LINK_KINDS:
            raise ValidationError(
                f"{context}unknown link kind {self.kind!r} (expected one of {LINK_KINDS})"
            )


@dataclass
class Document:
    """One retrievable unit: title + body text, publication year, and the
    outgoing links annotated as spans into ``body``."""

    id: DocId
    title: str = ""
    body: str = ""
    year: int | None = None
    links: list[LinkSpan] = field(default_factory=list)

    def validate(self, context: str = "") -> None:
        if not self.id:
            raise ValidationError(f"{context}document id must be nonempty")
        for span in self.links:
            span.validate(len(self.body), context=f"{context}doc {self.id!r}: ")


@dataclass
class Query:
    id: str
    text: str
    year: int | None = None

    def validate(self, context: str = "") -> None:
        if not self.id:
            raise ValidationError(f"{context}query id must be nonempty")
        if not self.text.strip():
            raise ValidationError(f"{context}query {self.id!r} has empty text")


@dataclass
class Corpus:
    """Documents keyed by id, plus the query set and judgments for one task."""

    documents: dict[DocId, Document] = field(default_factory=dict)
    queries: list[Query] = field(default_factory=list)
    qrels: Qrels = field(default_factory=dict)

    def dangling_link_targets(self) -> set[DocId]:
        """Link targets that do not resolve to a loaded document."""
        return {
            span.target
            for doc in self.documents.values()
            for span in doc.links
            if span.target not in self.documents
        }


def _int_or_none(value, what: str):
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{what} must be an integer or null, got {value!r}")
    return value


def _parse_doc_line(obj: dict) -> Document:
    if not isinstance(obj, dict):
        raise ValueError("expected a JSON object")
    doc_id = obj["id"]
    if not isinstance(doc_id, str):
        raise ValueError("'id' must be a string")
    title = obj.get("title", "")
    body = obj.get("body", "")
    if not isinstance(title, str) or not isinstance(body, str):
        raise ValueError("'title' and 'body' must be strings")
    links = []
    for raw in obj.get("links", []):
        links.append(
            LinkSpan(
                start=int(raw["start"]),
                end=int(raw["end"]),
                target=str(raw["target"]),
                kind=raw.get("kind", "citation"),
            )
        )
    return Document(
        id=doc_id,
        title=title,
        body=body,
        year=_int_or_none(obj.get("year"), "'year'"),
        links=links,
    )


def load_corpus(
    docs_path: str | Path,
    queries_path: str | Path | None = None,
    qrels_path: str | Path | None = None,
    fmt: str = "docs-jsonl",
) -> Corpus:
    """Load a corpus from line-delimited files, validating all invariants.

    Duplicate document ids and out-of-bounds link spans are hard errors
    (reported with the offending line number); dangling link targets are
    merely counted and logged.

    Raises:
        ParseError: a line is not valid JSON / lacks required fields.
        ValidationError: decoded data violates a documented invariant.
    """
    if fmt != "docs-jsonl":
        raise ValidationError(f"unsupported corpus format {fmt!r}")
    docs_path = Path(docs_path)
    documents: dict[DocId, Document] = {}
    with docs_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                doc = _parse_doc_line(obj)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(str(exc), path=str(docs_path), line=lineno) from exc
            if doc.id in documents:
                raise ValidationError(
                    f"{docs_path}:{lineno}: duplicate document id {doc.id!r}"
                )
            doc.validate(context=f"{docs_path}:{lineno}: ")
            documents[doc.id] = doc

    corpus = Corpus(documents=documents)
    if queries_path is not None:
        corpus.queries = load_queries(queries_path)
    if qrels_path is not None:
        corpus.qrels = load_qrels(qrels_path)
        _check_qrels(corpus)

    dangling = corpus.dangling_link_targets()
    if dangling:
        logger.warning(
            "%s: %d link target(s) not in corpus (kept; skipped at extraction)",
            docs_path,
            len(dangling),
        )
    return corpus


def load_queries(path: str | Path) -> list[Query]:
    """Load queries-jsonl; every query must have a nonempty text."""
    path = Path(path)
    queries: list[Query] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                query = Query(
                    id=str(obj["id"]),
                    text=obj["text"],
                    year=_int_or_none(obj.get("year"), "'year'"),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc
            if not isinstance(query.text, str):
                raise ParseError("'text' must be a string", path=str(path), line=lineno)
            if query.id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate query id {query.id!r}")
            query.validate(context=f"{path}:{lineno}: ")
            seen.add(query.id)
            queries.append(query)
    return queries


def load_qrels(path: str | Path) -> Qrels:
    """Load tab-separated judgments: ``query_id<TAB>doc_id<TAB>grade``."""
    path = Path(path)
    qrels: Qrels = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(
                    f"expected 3 tab-separated fields, got {len(parts)}",
                    path=str(path),
                    line=lineno,
                )
            qid, did, grade_str = parts
            try:
                grade = int(grade_str)
            except ValueError as exc:
                raise ParseError(
                    f"grade {grade_str!r} is not an integer", path=str(path), line=lineno
                ) from exc
            if grade < 0:
                raise ValidationError(f"{path}:{lineno}: negative grade {grade}")
            qrels.setdefault(qid, {})[did] = grade
    return qrels


def _check_qrels(corpus: Corpus) -> None:
    """Qrels must reference known queries; unknown doc ids are only counted."""
    known_queries = {q.id for q in corpus.queries}
    unknown_queries = set(corpus.qrels) - known_queries
    if unknown_queries:
        sample = sorted(unknown_queries)[:5]
        raise ValidationError(
            f"qrels reference {len(unknown_queries)} unknown query id(s), e.g. {sample}"
        )
    unknown_docs = {
        did
        for grades in corpus.qrels.values()
        for did in grades
        if did not in corpus.documents
    }
    if unknown_docs:
        logger.warning("qrels reference %d doc id(s) not in corpus", len(unknown_docs))


def save_corpus(corpus: Corpus, docs_path: str | Path) -> None:
    """Write documents back to docs-jsonl; reloading yields an equal Corpus."""
    docs_path = Path(docs_path)
    with docs_path.open("w", encoding="utf-8") as fh:
        for doc in corpus.documents.values():
            obj = {
                "id": doc.id,
                "title": doc.title,
                "body": doc.body,
                "year": doc.year,
                "links": [
                    {"start": s.start, "end": s.end, "target": s.target, "kind": s.kind}
                    for s in doc.links
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def save_queries(queries: list[Query], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(
                json.dumps({"id": q.id, "text": q.text, "year": q.year}, ensure_ascii=False)
                + "\n"
            )


def save_qrels(qrels: Qrels, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for qid in qrels:
            for did, grade in qrels[qid].items():
                fh.write(f"{qid}\t{did}\t{grade}\n")


def index_text(doc: Document) -> str:
    """The text a document is indexed under: title and body joined by one
    space, or just the body when the title is empty."""
    if doc.title:
        return doc.title + " " + doc.body
    return doc.body


def split_by_year(corpus: Corpus, cutoff: int) -> tuple[Corpus, Corpus]:
    """Partition documents into (candidates, evaluation) around a cutoff year.

    Candidates are documents with ``year <= cutoff``; evaluation documents
    are strictly newer.  Documents without a year fall into candidates and
    are logged.  Queries and qrels are carried on both slices unchanged.
    """
    candidates: dict[DocId, Document] = {}
    evaluation: dict[DocId, Document] = {}
    missing = 0
    for doc_id, doc in corpus.documents.items():
        if doc.year is None:
            missing += 1
            candidates[doc_id] = doc
        elif doc.year <= cutoff:
            candidates[doc_id] = doc
        else:
            evaluation[doc_id] = doc
    if missing:
        logger.info("split_by_year: %d document(s) without year placed in candidates", missing)
    return replace(corpus, documents=candidates), replace(corpus, documents=evaluation)
