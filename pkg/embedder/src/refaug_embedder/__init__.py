"""Embedding provider for refaug manifests: reads manifest JSON, encodes
each text unit, writes the RAREMB01 binary the retrieval engine loads."""

from .binfmt import EmbedderError, read_manifest, write_embeddings
from .encode import TransformerEncoder, synthetic_vectors

__version__ = "0.1.0"

__all__ = [
    "EmbedderError",
    "TransformerEncoder",
    "read_manifest",
    "synthetic_vectors",
    "write_embeddings",
]
