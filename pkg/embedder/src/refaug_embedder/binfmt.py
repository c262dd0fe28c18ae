"""Manifest reading and RAREMB01 writing.

Implements the published file contracts directly (see docs/FORMATS.md in
the main repository); deliberately shares no code with the consumer so the
formats themselves stay the interface.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"RAREMB01"


class EmbedderError(Exception):
    """Any failure this tool reports to the user."""


def read_manifest(path: str | Path) -> list[tuple[str, str]]:
    """Load manifest entries as (key, text) pairs.

    Raises:
        EmbedderError: malformed JSON, duplicate keys, or empty texts.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        raw = payload["entries"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise EmbedderError(f"{path}: not a valid manifest: {exc}") from exc
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    for i, obj in enumerate(raw):
        try:
            key, text = str(obj["key"]), obj["text"]
        except (KeyError, TypeError) as exc:
            raise EmbedderError(f"{path}: entry {i} malformed: {exc}") from exc
        if key in seen:
            raise EmbedderError(f"{path}: duplicate key {key!r}")
        if not isinstance(text, str) or not text:
            raise EmbedderError(f"{path}: entry {key!r} has empty text")
        seen.add(key)
        entries.append((key, text))
    return entries


def write_embeddings(
    path: str | Path,
    dim: int,
    records: Iterable[tuple[str, Sequence[float]]],
    model_label: str = "",
) -> int:
    """Write the little-endian RAREMB01 layout atomically (temp + rename).

    Returns the number of records written.
    """
    path = Path(path)
    records = list(records)
    label = model_label.encode("utf-8")
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IQH", dim, len(records), len(label)))
            fh.write(label)
            for key, vector in records:
                vec = np.asarray(vector, dtype="<f4")
                if vec.shape != (dim,):
                    raise EmbedderError(
                        f"vector for {key!r} has shape {vec.shape}, expected ({dim},)"
                    )
                if not np.all(np.isfinite(vec)):
                    raise EmbedderError(f"vector for {key!r} has non-finite components")
                key_bytes = key.encode("utf-8")
                fh.write(struct.pack("<H", len(key_bytes)))
                fh.write(key_bytes)
                fh.write(vec.tobytes())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return len(records)
