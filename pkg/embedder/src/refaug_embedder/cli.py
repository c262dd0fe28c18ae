"""refaug-embed: turn a manifest of text units into an embedding file.

Two modes:

* ``--model <name-or-path>``: encode with any AutoModel-compatible
  checkpoint, deterministic inference (eval mode, no dropout), masked mean
  or [CLS] pooling.
* ``--synthetic --dim D --seed S``: seeded random unit vectors keyed by
  text alone; no model stack involved.  Useful for pipeline tests.

Identical texts always map to identical vectors; the output file does not
depend on manifest order or batch size.  The file is written atomically.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .binfmt import EmbedderError, read_manifest, write_embeddings
from .encode import TransformerEncoder, synthetic_vectors


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refaug-embed",
        description="Encode every entry of a manifest JSON into a RAREMB01 "
        "embedding file.",
    )
    parser.add_argument("manifest", help="manifest JSON listing keys and texts")
    parser.add_argument("--out", required=True, help="output embedding file")
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--model", help="pretrained encoder name or local path")
    mode.add_argument(
        "--synthetic",
        action="store_true",
        help="emit seeded random unit vectors instead of running a model",
    )
    parser.add_argument("--dim", type=int, default=64, help="vector size (synthetic mode)")
    parser.add_argument("--seed", type=int, default=0, help="seed (synthetic mode)")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--max-length", type=int, default=256,
                        help="token truncation limit (model mode)")
    parser.add_argument("--pooling", choices=("mean", "cls"), default="mean")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def run(args) -> int:
    entries = read_manifest(args.manifest)
    texts = [text for _, text in entries]
    if args.synthetic:
        by_text = synthetic_vectors(texts, dim=args.dim, seed=args.seed)
        dim = args.dim
        label = f"synthetic dim={args.dim} seed={args.seed}"
        truncated = 0
    else:
        encoder = TransformerEncoder(
            args.model, max_length=args.max_length, pooling=args.pooling
        )
        try:
            by_text = encoder.encode_unique(texts, batch_size=args.batch_size)
        except EmbedderError as exc:
            # Name the manifest key, not just the text, in the abort message.
            for key, text in entries:
                if repr(text[:60]) in str(exc):
                    raise EmbedderError(f"key {key!r}: {exc}") from exc
            raise
        dim = encoder.dim
        label = f"{args.model} pooling={args.pooling} max_length={args.max_length}"
        truncated = encoder.truncated
    count = write_embeddings(
        args.out, dim, ((key, by_text[text]) for key, text in entries), label
    )
    summary = {
        "out": args.out,
        "count": count,
        "dim": dim,
        "model": label,
        "truncated": truncated,
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except EmbedderError as exc:
        print(f"refaug-embed: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"refaug-embed: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
