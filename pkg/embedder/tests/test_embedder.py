"""Embedder: manifest to RAREMB01, both modes, consumed by the engine."""

import json
import time

import numpy as np
import pytest

from refaug_embedder import (
    EmbedderError,
    TransformerEncoder,
    read_manifest,
    synthetic_vectors,
    write_embeddings,
)
from refaug_embedder.cli import main

from embedder_helpers import write_manifest

# The consumer side: files must load through the engine's reader.
from refaug import load_embeddings


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestManifestReading:
    def test_reads_entries_in_order(self, tmp_path):
        path = write_manifest(tmp_path / "m.json", [("doc:a", "text a"), ("qry:q", "text q")])
        assert read_manifest(path) == [("doc:a", "text a"), ("qry:q", "text q")]

    def test_duplicate_key_rejected(self, tmp_path):
        path = write_manifest(tmp_path / "m.json", [("doc:a", "x"), ("doc:a", "y")])
        with pytest.raises(EmbedderError, match="duplicate"):
            read_manifest(path)

    def test_empty_text_rejected(self, tmp_path):
        path = write_manifest(tmp_path / "m.json", [("doc:a", "")])
        with pytest.raises(EmbedderError, match="empty text"):
            read_manifest(path)

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{nope")
        with pytest.raises(EmbedderError, match="not a valid manifest"):
            read_manifest(path)


class TestSyntheticMode:
    def test_round_trip_through_engine(self, tmp_path, capsys):
        manifest = write_manifest(
            tmp_path / "m.json",
            [("doc:a", "alpha"), ("doc:b", "beta"), ("qry:q1", "gamma")],
        )
        out = tmp_path / "emb.bin"
        code, stdout, _ = run_cli(
            capsys, manifest, "--out", out, "--synthetic", "--dim", 16, "--seed", 3
        )
        assert code == 0
        assert json.loads(stdout)["count"] == 3
        emb = load_embeddings(out)
        assert emb.dim == 16
        assert set(emb.vectors) == {"doc:a", "doc:b", "qry:q1"}

    def test_identical_texts_identical_vectors(self, tmp_path, capsys):
        manifest = write_manifest(
            tmp_path / "m.json", [("doc:a", "same words"), ("ref:a:1", "same words")]
        )
        out = tmp_path / "emb.bin"
        run_cli(capsys, manifest, "--out", out, "--synthetic", "--dim", 8)
        emb = load_embeddings(out)
        assert np.array_equal(emb.get("doc:a"), emb.get("ref:a:1"))

    def test_empty_manifest_gives_valid_empty_file(self, tmp_path, capsys):
        manifest = write_manifest(tmp_path / "m.json", [])
        out = tmp_path / "emb.bin"
        code, stdout, _ = run_cli(capsys, manifest, "--out", out, "--synthetic", "--dim", 4)
        assert code == 0
        emb = load_embeddings(out)
        assert len(emb) == 0 and emb.dim == 4

    def test_deterministic_across_runs(self, tmp_path, capsys):
        manifest = write_manifest(tmp_path / "m.json", [("doc:a", "alpha"), ("doc:b", "beta")])
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        run_cli(capsys, manifest, "--out", a, "--synthetic", "--dim", 8, "--seed", 9)
        run_cli(capsys, manifest, "--out", b, "--synthetic", "--dim", 8, "--seed", 9)
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_vectors(self):
        one = synthetic_vectors(["t"], dim=8, seed=1)["t"]
        two = synthetic_vectors(["t"], dim=8, seed=2)["t"]
        assert not np.array_equal(one, two)

    def test_vectors_are_unit_norm(self):
        vecs = synthetic_vectors(["a", "b", "c"], dim=12, seed=0)
        for v in vecs.values():
            assert np.linalg.norm(v) == pytest.approx(1.0)
            assert float(v @ v) > 0.0


class TestModelMode:
    def test_round_trip_through_engine(self, tmp_path, capsys, tiny_model_dir):
        manifest = write_manifest(
            tmp_path / "m.json",
            [("doc:a", "abc def"), ("doc:b", "ghi jkl mno"), ("qry:q", "abc")],
        )
        out = tmp_path / "emb.bin"
        code, stdout, _ = run_cli(capsys, manifest, "--out", out, "--model", tiny_model_dir)
        assert code == 0
        summary = json.loads(stdout)
        emb = load_embeddings(out)
        assert emb.dim == summary["dim"] == 32
        assert len(emb) == 3
        assert tiny_model_dir in emb.model_label
        for key in ("doc:a", "doc:b", "qry:q"):
            vec = emb.get(key)
            assert float(vec @ vec) > 0.0

    def test_identical_texts_identical_vectors(self, tmp_path, capsys, tiny_model_dir):
        manifest = write_manifest(
            tmp_path / "m.json",
            [("doc:a", "same words here"), ("cat:z", "same words here")],
        )
        out = tmp_path / "emb.bin"
        run_cli(capsys, manifest, "--out", out, "--model", tiny_model_dir)
        emb = load_embeddings(out)
        assert np.array_equal(emb.get("doc:a"), emb.get("cat:z"))

    def test_output_independent_of_batch_size_and_order(self, tmp_path, tiny_model_dir):
        entries = [(f"doc:{i}", f"text number {i} with words") for i in range(7)]
        encoder = TransformerEncoder(tiny_model_dir)
        texts = [t for _, t in entries]
        small = encoder.encode_unique(texts, batch_size=1)
        big = encoder.encode_unique(list(reversed(texts)), batch_size=8)
        for text in texts:
            assert np.allclose(small[text], big[text], atol=1e-6)

    def test_cls_pooling_differs_from_mean(self, tiny_model_dir):
        mean = TransformerEncoder(tiny_model_dir, pooling="mean")
        cls = TransformerEncoder(tiny_model_dir, pooling="cls")
        text = "abc def ghi"
        assert not np.allclose(
            mean.encode_unique([text])[text], cls.encode_unique([text])[text]
        )

    def test_truncation_warns_and_encodes(self, tmp_path, capsys, tiny_model_dir, caplog):
        long_text = " ".join(["word"] * 500)
        manifest = write_manifest(tmp_path / "m.json", [("doc:long", long_text)])
        out = tmp_path / "emb.bin"
        with caplog.at_level("WARNING"):
            code, stdout, _ = run_cli(
                capsys, manifest, "--out", out, "--model", tiny_model_dir,
                "--max-length", 16,
            )
        assert code == 0
        assert json.loads(stdout)["truncated"] == 1
        assert any("max length" in rec.message for rec in caplog.records)
        assert len(load_embeddings(out)) == 1

    def test_encoding_failure_aborts_naming_key(self, tmp_path, capsys, tiny_model_dir, monkeypatch):
        manifest = write_manifest(
            tmp_path / "m.json", [("doc:ok", "fine text"), ("doc:bad", "poison text")]
        )
        original = TransformerEncoder._encode_batch

        def exploding(self, batch):
            if any("poison" in text for text in batch):
                raise RuntimeError("synthetic encoder blowup")
            return original(self, batch)

        monkeypatch.setattr(TransformerEncoder, "_encode_batch", exploding)
        out = tmp_path / "emb.bin"
        code, _, err = run_cli(capsys, manifest, "--out", out, "--model", tiny_model_dir)
        assert code == 1
        assert "doc:bad" in err
        assert not out.exists()

    def test_hundred_entry_manifest_under_budget(self, tmp_path, capsys, tiny_model_dir):
        entries = [(f"doc:{i}", f"document {i} body text {i % 9}") for i in range(100)]
        manifest = write_manifest(tmp_path / "m.json", entries)
        out = tmp_path / "emb.bin"
        started = time.monotonic()
        code, _, _ = run_cli(capsys, manifest, "--out", out, "--model", tiny_model_dir)
        elapsed = time.monotonic() - started
        assert code == 0
        assert elapsed < 300.0, f"100-entry manifest took {elapsed:.1f}s"
        emb = load_embeddings(out)
        assert len(emb) == 100
        print(f"\nACCEPTANCE PASS: criterion 8 (embedder round-trip, {elapsed:.1f}s)")


class TestWriterGuards:
    def test_wrong_shape_rejected_and_no_partial_file(self, tmp_path):
        out = tmp_path / "emb.bin"
        with pytest.raises(EmbedderError, match="shape"):
            write_embeddings(out, 4, [("k", np.ones(3))])
        assert not out.exists()
        assert list(tmp_path.iterdir()) == []  # temp file cleaned up

    def test_nonfinite_rejected(self, tmp_path):
        out = tmp_path / "emb.bin"
        with pytest.raises(EmbedderError, match="non-finite"):
            write_embeddings(out, 2, [("k", np.array([np.inf, 1.0]))])
        assert not out.exists()

    def test_missing_manifest_is_clean_error(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, tmp_path / "absent.json", "--out", tmp_path / "o", "--synthetic"
        )
        assert code == 1
        assert err.startswith("refaug-embed: error:")
