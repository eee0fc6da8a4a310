#!/usr/bin/env python3
"""Time trial scoring + EER and corpus WER on synthetic data.

    python3 scripts/bench.py [--trials 100000] [--pairs 10000] [--dim 192]
"""
import argparse
import time

import numpy as np

from vpkit.ingest import EmbeddingTable, SpeakerModel, TranscriptEntry, TranscriptSet, Trial, TrialSet
from vpkit.metrics import compute_wer, privacy_report, score_trials
from vpkit.synthetic import VOCAB, corrupt


def bench_eer(rng, n_trials, dim, n_models=100):
    n_utts = n_trials // n_models
    entries, models = {}, {}
    for m in range(n_models):
        enroll = tuple(f"e{m:03d}_{k}" for k in range(5))
        centre = rng.standard_normal(dim)
        for key in enroll:
            entries[key] = centre + rng.standard_normal(dim)
        models[f"m{m:03d}"] = SpeakerModel(f"s{m:03d}", ("female", "male")[m % 2], enroll)
    for u in range(n_utts):
        entries[f"t{u:06d}"] = rng.standard_normal(dim)
    pairs = [Trial(m, f"t{u:06d}", "target" if u % n_models == i else "nontarget")
             for i, m in enumerate(models) for u in range(n_utts)]
    trials = TrialSet(models, pairs)
    table = EmbeddingTable(dim, entries)
    t0 = time.perf_counter()
    rep = privacy_report(score_trials(trials, table), trials.model_genders())
    return time.perf_counter() - t0, len(pairs), rep.eer_avg


def bench_wer(rng, n_pairs):
    refs, hyps = {}, {}
    for i in range(n_pairs):
        words = [str(w) for w in rng.choice(VOCAB, int(rng.integers(8, 25)))]
        refs[f"u{i:06d}"] = TranscriptEntry("en", " ".join(words))
        hyps[f"u{i:06d}"] = TranscriptEntry("en", " ".join(corrupt(rng, words, 0.2)))
    t0 = time.perf_counter()
    res = compute_wer(TranscriptSet(refs, "gold"), TranscriptSet(hyps, "asr"))
    return time.perf_counter() - t0, res.rate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--pairs", type=int, default=10_000)
    ap.add_argument("--dim", type=int, default=192)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    secs, n, eer = bench_eer(rng, args.trials, args.dim)
    print(f"scoring+EER: {n} trials, dim {args.dim}: {secs:.3f}s (EER {eer:.4f})")
    secs, rate = bench_wer(rng, args.pairs)
    print(f"corpus WER: {args.pairs} pairs: {secs:.3f}s (WER {rate:.4f})")


if __name__ == "__main__":
    main()
