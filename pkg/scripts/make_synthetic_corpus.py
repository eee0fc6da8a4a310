#!/usr/bin/env python3
"""Write a synthetic CommonVoice-style corpus with matching embeddings.

    python3 scripts/make_synthetic_corpus.py OUT_DIR [--speakers 20] [--seed 0]

Produces OUT_DIR/validated.tsv, OUT_DIR/embeddings.vpeb and OUT_DIR/pool.vpeb,
ready for ``vpkit trialgen``, ``vpkit score`` and ``vpkit anonymize``.
"""
import argparse
from pathlib import Path

import numpy as np

from vpkit import ingest
from vpkit.synthetic import make_manifest, random_table, speaker_embeddings, write_cv_tsv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", type=Path)
    ap.add_argument("--speakers", type=int, default=20, help="speakers per gender")
    ap.add_argument("--min-utts", type=int, default=6)
    ap.add_argument("--max-utts", type=int, default=90)
    ap.add_argument("--dim", type=int, default=192)
    ap.add_argument("--pool-size", type=int, default=200)
    ap.add_argument("--language", default="de")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    man = make_manifest(rng, args.speakers, (args.min_utts, args.max_utts), args.language)
    write_cv_tsv(man, args.out / "validated.tsv", hash_ids=False)
    ingest.write_embeddings(speaker_embeddings(rng, man, args.dim), args.out / "embeddings.vpeb")
    ingest.write_embeddings(random_table(rng, args.pool_size, args.dim, "pool"), args.out / "pool.vpeb")
    print(f"{len(man.records)} utterances from {2 * args.speakers} speakers in {args.out}")


if __name__ == "__main__":
    main()
