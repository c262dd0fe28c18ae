"""Text encoders: a pretrained transformer and a model-free synthetic mode.

Both encoders map *unique texts* to vectors; callers fan the vectors back
out to manifest keys.  Encoding unique texts once, in sorted order, makes
the output independent of manifest order and batch boundaries, and
guarantees identical texts get bit-identical vectors.
"""

from __future__ import annotations

import hashlib
import logging
from typing import Sequence

import numpy as np

from .binfmt import EmbedderError

logger = logging.getLogger(__name__)


def synthetic_vectors(texts: Sequence[str], dim: int, seed: int) -> dict[str, np.ndarray]:
    """Seeded random unit vectors; a pure function of (seed, text)."""
    if dim < 1:
        raise EmbedderError(f"--dim must be >= 1, got {dim}")
    out: dict[str, np.ndarray] = {}
    for text in sorted(set(texts)):
        digest = hashlib.sha256(
            seed.to_bytes(8, "little", signed=True) + text.encode("utf-8")
        )
        rng = np.random.default_rng(int.from_bytes(digest.digest()[:8], "little"))
        vec = rng.standard_normal(dim)
        out[text] = vec / np.linalg.norm(vec)
    return out


class TransformerEncoder:
    """Deterministic sentence encoding with any AutoModel checkpoint.

    Inference runs in eval mode (dropout off) under no_grad; pooling is
    either attention-masked mean pooling over the last hidden state or the
    [CLS] vector.  Padding positions are excluded, so a text's vector does
    not depend on what else shares its batch.
    """

    def __init__(self, model: str, max_length: int = 256, pooling: str = "mean"):
        if pooling not in ("mean", "cls"):
            raise EmbedderError(f"unknown pooling {pooling!r} (expected mean or cls)")
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - deps are declared
            raise EmbedderError(f"model mode needs torch+transformers: {exc}") from exc
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model)
            self.model = AutoModel.from_pretrained(model)
        except Exception as exc:
            raise EmbedderError(f"cannot load model {model!r}: {exc}") from exc
        self.model.eval()
        self.max_length = max_length
        self.pooling = pooling
        self.dim = int(self.model.config.hidden_size)
        self.truncated = 0

    def _count_truncations(self, texts: Sequence[str]) -> None:
        for text in texts:
            ids = self.tokenizer(text, truncation=False)["input_ids"]
            if len(ids) > self.max_length:
                self.truncated += 1

    def _encode_batch(self, batch: Sequence[str]) -> np.ndarray:
        torch = self._torch
        tokens = self.tokenizer(
            list(batch),
            padding=True,
            truncation=True,
            max_length=self.max_length,
            return_tensors="pt",
        )
        with torch.no_grad():
            output = self.model(**tokens)
        hidden = output.last_hidden_state
        if self.pooling == "cls":
            pooled = hidden[:, 0, :]
        else:
            mask = tokens["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
        return pooled.cpu().numpy().astype(np.float64)

    def encode_unique(self, texts: Sequence[str], batch_size: int = 32) -> dict[str, np.ndarray]:
        """Encode every distinct text once, in sorted order.

        Raises:
            EmbedderError: encoding failed; the message names the text so
            the caller can report the offending key.
        """
        if batch_size < 1:
            raise EmbedderError(f"--batch-size must be >= 1, got {batch_size}")
        unique = sorted(set(texts))
        self._count_truncations(unique)
        if self.truncated:
            logger.warning(
                "%d text(s) exceed max length %d; encoding truncated",
                self.truncated,
                self.max_length,
            )
        vectors: dict[str, np.ndarray] = {}
        for start in range(0, len(unique), batch_size):
            batch = unique[start : start + batch_size]
            try:
                pooled = self._encode_batch(batch)
            except Exception:
                # Re-run one by one so the failure names a single text.
                for text in batch:
                    try:
                        vectors[text] = self._encode_batch([text])[0]
                    except Exception as exc:
                        raise EmbedderError(
                            f"encoding failed for text {text[:60]!r}: {exc}"
                        ) from exc
                continue
            for text, vec in zip(batch, pooled):
                vectors[text] = vec
        return vectors
