"""Corpus loading, validation, serialization, and the year split."""

import json

import pytest
from hypothesis import given, strategies as st

from refaug import (
    Corpus,
    Document,
    LinkSpan,
    ParseError,
    Query,
    ValidationError,
    index_text,
    load_corpus,
    load_qrels,
    load_queries,
    save_corpus,
    split_by_year,
)
from refaug.corpus import save_qrels, save_queries

from helpers import doc_row, write_jsonl, write_qrels_tsv


class TestLoadCorpus:
    def test_two_valid_lines(self, tmp_path):
        path = write_jsonl(
            tmp_path / "docs.jsonl",
            [doc_row("d1", title="A", body="one"), doc_row("d2", body="two")],
        )
        corpus = load_corpus(path)
        assert set(corpus.documents) == {"d1", "d2"}
        assert corpus.documents["d1"].title == "A"

    def test_duplicate_id_names_line(self, tmp_path):
        path = write_jsonl(
            tmp_path / "docs.jsonl",
            [doc_row("d1"), doc_row("d2"), doc_row("d1")],
        )
        with pytest.raises(ValidationError, match=r":3.*d1"):
            load_corpus(path)

    def test_inverted_span_rejected(self, tmp_path):
        path = write_jsonl(
            tmp_path / "docs.jsonl",
            [doc_row("d1", body="0123456789", links=[(5, 2, "d2", "citation")])],
        )
        with pytest.raises(ValidationError, match="out of bounds"):
            load_corpus(path)

    def test_span_past_end_rejected(self, tmp_path):
        path = write_jsonl(
            tmp_path / "docs.jsonl",
            [doc_row("d1", body="short", links=[(0, 99, "d2", "citation")])],
        )
        with pytest.raises(ValidationError):
            load_corpus(path)

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        path.write_text('{"id": "d1", "body": ""}\nnot json\n', encoding="utf-8")
        with pytest.raises(ParseError, match=":2"):
            load_corpus(path)

    def test_missing_id_is_parse_error(self, tmp_path):
        path = write_jsonl(tmp_path / "docs.jsonl", [{"body": "x"}])
        with pytest.raises(ParseError, match=":1"):
            load_corpus(path)

    def test_unknown_link_kind_rejected(self, tmp_path):
        path = write_jsonl(
            tmp_path / "docs.jsonl",
            [doc_row("d1", body="abc", links=[(0, 1, "d2", "trackback")])],
        )
        with pytest.raises(ValidationError, match="trackback"):
            load_corpus(path)

    def test_dangling_targets_tolerated(self, tmp_path):
        path = write_jsonl(
            tmp_path / "docs.jsonl",
            [doc_row("d1", body="see other", links=[(0, 3, "dX", "citation")])],
        )
        corpus = load_corpus(path)
        assert corpus.dangling_link_targets() == {"dX"}

    def test_year_must_be_int_or_null(self, tmp_path):
        path = write_jsonl(tmp_path / "docs.jsonl", [{"id": "d1", "body": "", "year": "2019"}])
        with pytest.raises(ParseError):
            load_corpus(path)


class TestQueriesAndQrels:
    def test_load_queries(self, tmp_path):
        path = write_jsonl(
            tmp_path / "q.jsonl",
            [{"id": "q1", "text": "hello", "year": 2020}, {"id": "q2", "text": "bye"}],
        )
        queries = load_queries(path)
        assert [q.id for q in queries] == ["q1", "q2"]
        assert queries[0].year == 2020

    def test_blank_query_text_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "q.jsonl", [{"id": "q1", "text": "   "}])
        with pytest.raises(ValidationError, match="q1"):
            load_queries(path)

    def test_duplicate_query_id_rejected(self, tmp_path):
        path = write_jsonl(
            tmp_path / "q.jsonl",
            [{"id": "q1", "text": "a"}, {"id": "q1", "text": "b"}],
        )
        with pytest.raises(ValidationError, match="q1"):
            load_queries(path)

    def test_load_qrels(self, tmp_path):
        path = write_qrels_tsv(tmp_path / "qrels.tsv", [("q1", "d1", 2), ("q1", "d2", 0)])
        qrels = load_qrels(path)
        assert qrels == {"q1": {"d1": 2, "d2": 0}}

    def test_negative_grade_rejected(self, tmp_path):
        path = tmp_path / "qrels.tsv"
        path.write_text("q1\td1\t-1\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="negative"):
            load_qrels(path)

    def test_bad_column_count(self, tmp_path):
        path = tmp_path / "qrels.tsv"
        path.write_text("q1 d1 1\n", encoding="utf-8")
        with pytest.raises(ParseError, match=":1"):
            load_qrels(path)

    def test_qrels_with_unknown_query_rejected(self, tmp_path):
        docs = write_jsonl(tmp_path / "docs.jsonl", [doc_row("d1")])
        queries = write_jsonl(tmp_path / "q.jsonl", [{"id": "q1", "text": "x"}])
        qrels = write_qrels_tsv(tmp_path / "qrels.tsv", [("qZ", "d1", 1)])
        with pytest.raises(ValidationError, match="qZ"):
            load_corpus(docs, queries_path=queries, qrels_path=qrels)

    def test_qrels_with_unknown_doc_is_only_flagged(self, tmp_path, caplog):
        docs = write_jsonl(tmp_path / "docs.jsonl", [doc_row("d1")])
        queries = write_jsonl(tmp_path / "q.jsonl", [{"id": "q1", "text": "x"}])
        qrels = write_qrels_tsv(tmp_path / "qrels.tsv", [("q1", "dZ", 1)])
        with caplog.at_level("WARNING"):
            corpus = load_corpus(docs, queries_path=queries, qrels_path=qrels)
        assert corpus.qrels == {"q1": {"dZ": 1}}
        assert any("doc id" in rec.message for rec in caplog.records)


class TestIndexText:
    def test_title_and_body(self):
        assert index_text(Document(id="d", title="A", body="B")) == "A B"

    def test_empty_title(self):
        assert index_text(Document(id="d", title="", body="B")) == "B"

    def test_realistic(self):
        doc = Document(id="d", title="T5 paper", body="We study...")
        assert index_text(doc) == "T5 paper We study..."

    @given(st.text(max_size=30), st.text(max_size=80))
    def test_no_new_characters_beyond_joining_space(self, title, body):
        text = index_text(Document(id="d", title=title, body=body))
        allowed = set(title) | set(body) | {" "}
        assert set(text) <= allowed


class TestSplitByYear:
    def _corpus(self, years):
        docs = {
            f"d{i}": Document(id=f"d{i}", body="x", year=year)
            for i, year in enumerate(years)
        }
        return Corpus(documents=docs)

    def test_cutoff_2018(self):
        corpus = self._corpus([2017, 2018, 2019])
        candidates, evaluation = split_by_year(corpus, 2018)
        assert sorted(d.year for d in candidates.documents.values()) == [2017, 2018]
        assert [d.year for d in evaluation.documents.values()] == [2019]

    def test_boundary_all_candidates(self):
        corpus = self._corpus([2018, 2018])
        candidates, evaluation = split_by_year(corpus, 2018)
        assert len(candidates.documents) == 2
        assert evaluation.documents == {}

    def test_missing_year_goes_to_candidates(self):
        corpus = self._corpus([None])
        candidates, evaluation = split_by_year(corpus, 2018)
        assert len(candidates.documents) == 1
        assert evaluation.documents == {}

    @given(st.lists(st.one_of(st.none(), st.integers(1900, 2100)), max_size=30), st.integers(1900, 2100))
    def test_partition(self, years, cutoff):
        corpus = self._corpus(years)
        candidates, evaluation = split_by_year(corpus, cutoff)
        assert set(candidates.documents) | set(evaluation.documents) == set(corpus.documents)
        assert set(candidates.documents) & set(evaluation.documents) == set()


class TestRoundTrip:
    def test_docs_round_trip_field_by_field(self, tmp_path):
        path = write_jsonl(
            tmp_path / "docs.jsonl",
            [
                doc_row("d1", title="Ti", body="see link here", year=2018,
                        links=[(4, 8, "d2", "hyperlink")]),
                doc_row("d2", body="unicode éłø", year=None),
            ],
        )
        corpus = load_corpus(path)
        out = tmp_path / "out.jsonl"
        save_corpus(corpus, out)
        assert load_corpus(out) == corpus

    def test_docs_file_bytes_stable(self, tmp_path):
        rows = [doc_row("d1", title="A", body="b", year=2000, links=[(0, 1, "d9", "citation")])]
        path = write_jsonl(tmp_path / "docs.jsonl", rows)
        corpus = load_corpus(path)
        first = tmp_path / "first.jsonl"
        second = tmp_path / "second.jsonl"
        save_corpus(corpus, first)
        save_corpus(load_corpus(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_queries_and_qrels_round_trip(self, tmp_path):
        queries = [Query(id="q1", text="hello world", year=2019), Query(id="q2", text="x")]
        qrels = {"q1": {"d1": 1, "d2": 0}, "q2": {"d1": 3}}
        qpath, rpath = tmp_path / "q.jsonl", tmp_path / "r.tsv"
        save_queries(queries, qpath)
        save_qrels(qrels, rpath)
        assert load_queries(qpath) == queries
        assert load_qrels(rpath) == qrels


def test_linkspan_is_frozen():
    span = LinkSpan(start=0, end=1, target="d2")
    with pytest.raises(AttributeError):
        span.start = 5


def test_save_corpus_emits_documented_schema(tmp_path):
    corpus = Corpus(
        documents={
            "d1": Document(id="d1", title="T", body="abc", year=2019,
                           links=[LinkSpan(0, 1, "d2", "citation")])
        }
    )
    out = tmp_path / "docs.jsonl"
    save_corpus(corpus, out)
    obj = json.loads(out.read_text().splitlines()[0])
    assert obj == {
        "id": "d1",
        "title": "T",
        "body": "abc",
        "year": 2019,
        "links": [{"start": 0, "end": 1, "target": "d2", "kind": "citation"}],
    }
