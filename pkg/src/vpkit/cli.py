"""Command-line entry point: ``vpkit <subcommand> ...``.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, ingest, metrics, prosody, report
from .anonymize import AnonymizationPolicy, ArtificialPool, apply_assignment, assign_targets, write_assignment
from .core import VPKitError
from .orchestrate import CONDITION_ORDER, RunConfig, run_ablation
from .trialgen import TrialGenConfig, generate_trials

CONFIG_ENV = "VPKIT_CONFIG"


def _emit(text: str, out=None):
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def read_utt2spk(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ingest.FormatError("expected '<utt-id> <speaker-id>'", path, lineno)
            out[parts[0]] = parts[1]
    return out


# ---------------------------------------------------------------- commands


def cmd_trialgen(args):
    fmt = args.format or ("cv_tsv" if args.dataset == "cv" else "libri_dir")
    manifest = ingest.parse_manifest(args.manifest, fmt, args.language, args.speaker_meta)
    overrides = {"seed": args.seed}
    for name in ("enroll_speakers_per_gender", "extra_trial_speakers_per_gender",
                 "enroll_fraction", "enroll_min"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if args.utterance_cap is not None:
        overrides["utterance_cap"] = args.utterance_cap if args.utterance_cap > 0 else None
    config = TrialGenConfig.for_dataset(args.dataset, **overrides)
    trials, summary = generate_trials(manifest, config)
    enroll_out = args.enroll_out or Path(args.out).with_suffix(".enroll.txt")
    ingest.write_trials(trials, args.out, enroll_out)
    summary["dropped_rows"] = manifest.dropped
    _emit(_json(summary), args.summary)
    return 0


def cmd_anonymize(args):
    table = ingest.read_embeddings(args.embeddings)
    pool = ArtificialPool(ingest.read_embeddings(args.pool), str(args.pool))
    if args.utt2spk:
        utt2spk = read_utt2spk(args.utt2spk)
    elif args.level == "utterance":
        utt2spk = {k: k for k in table.keys()}
    else:
        raise VPKitError("--utt2spk is required for speaker-level anonymization")
    policy = AnonymizationPolicy(args.level, args.dmin, args.max_attempts, args.seed)
    assignment = assign_targets(table, utt2spk, policy, pool)
    ingest.write_embeddings(apply_assignment(table, assignment, pool), args.out)
    write_assignment(assignment, args.map)
    n_fallback = sum(s.fallback for s in assignment.entries.values())
    sys.stderr.write(
        f"assigned {len(assignment.entries)} {args.level} targets "
        f"(d_min={args.dmin}, {n_fallback} fallback; session: {assignment.session})\n"
    )
    return 0


def cmd_prosody(args):
    if args.action == "normalize":
        seqs = prosody.read_prosody(args.inp)
        normed = {u: prosody.normalize(s) for u, s in seqs.items()}
        prosody.write_prosody(normed, args.out)
        prosody.write_stats(normed, args.stats)
    else:
        seqs = prosody.read_prosody(args.inp)
        stats = prosody.read_stats(args.stats)
        restored = {}
        for utt, s in seqs.items():
            if utt not in stats:
                raise VPKitError(f"no stats for utterance {utt}")
            restored[utt] = prosody.denormalize(
                prosody.NormalizedProsody(s.phones, s.pitch, s.energy, s.duration, stats[utt])
            )
        prosody.write_prosody(restored, args.out)
    return 0


def cmd_score(args):
    trials = ingest.read_trials(args.trials, args.enrollment)
    table = ingest.read_embeddings(args.embeddings)
    ingest.write_scores(metrics.score_trials(trials, table), args.out)
    return 0


def cmd_eer(args):
    scored = ingest.read_scores(args.scores)
    if args.enrollment:
        genders = ingest.read_enrollment(args.enrollment)
        rep = metrics.privacy_report(scored, {m: s.gender for m, s in genders.items()})
        result = {
            "eer": rep.eer_avg,
            "eer_female": rep.eer_female,
            "eer_male": rep.eer_male,
            "raw": rep.raw_eer,
            "flipped": rep.flipped,
            "single_gender": rep.single_gender,
        }
    else:
        tgt, non = metrics.split_by_label(scored)
        res = metrics.compute_eer(tgt, non)
        reported, flipped = metrics.flip_rule(res.eer)
        result = {"eer": reported, "raw": res.eer, "threshold": res.threshold, "flipped": flipped}
    if args.json:
        _emit(_json(result))
    else:
        _emit(metrics.percent(result["eer"]) + "\n")
    return 0


def _error_rate(args, per: bool):
    refs = ingest.read_transcripts(args.ref, "gold")
    hyps = ingest.read_transcripts(args.hyp, "asr")
    if per:
        res = metrics.compute_per(refs, hyps, jobs=args.jobs)
    else:
        res = metrics.compute_wer(refs, hyps, None if args.no_normalize else metrics.normalize_text,
                                  jobs=args.jobs)
    if args.json:
        _emit(_json({"rate": res.rate, "S": res.substitutions, "D": res.deletions,
                     "I": res.insertions, "ref_tokens": res.ref_tokens}))
    else:
        _emit(metrics.percent(res.rate) + "\n")
    return 0


def cmd_ablate(args):
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        raise VPKitError(f"no --config given and ${CONFIG_ENV} is unset")
    config = RunConfig.load(path)
    if args.jobs:
        config.jobs = args.jobs
    conditions = args.conditions.split(",") if args.conditions else None
    rows = run_ablation(config, conditions)
    _emit(report.render(rows, "markdown"))
    return 0


def _trial_spec(text: str):
    if "=" in text:
        label, path = text.split("=", 1)
        dataset, _, language = label.partition("/")
        return dataset, language or "-", Path(path)
    return "-", Path(text).stem, Path(text)


def cmd_report(args):
    if args.trial_files:
        _emit(report.trial_count_summary([_trial_spec(t) for t in args.trial_files]), args.out)
    else:
        _emit(report.render(report.load_rows(args.runs), args.format), args.out)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vpkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="store_true", help="print version to stderr and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker bound for metrics and orchestration (default: cores)")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("trialgen", help="build enrollment/trial files from a dataset manifest")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--dataset", required=True, choices=["cv", "libri"])
    p.add_argument("--format", choices=["cv_tsv", "libri_dir"])
    p.add_argument("--language", required=True)
    p.add_argument("--speaker-meta", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--enroll-out", type=Path, help="default: <out>.enroll.txt")
    p.add_argument("--summary", type=Path, help="JSON summary path (default stdout)")
    p.add_argument("--enroll-speakers", dest="enroll_speakers_per_gender", type=int)
    p.add_argument("--extra-trial-speakers", dest="extra_trial_speakers_per_gender", type=int)
    p.add_argument("--utterance-cap", type=int, help="0 disables the cap")
    p.add_argument("--enroll-fraction", type=float)
    p.add_argument("--enroll-min", type=int)
    p.set_defaults(func=cmd_trialgen)

    p = sub.add_parser("anonymize", help="assign artificial speaker embeddings")
    p.add_argument("--embeddings", required=True, type=Path)
    p.add_argument("--pool", required=True, type=Path)
    p.add_argument("--utt2spk", type=Path, help="'<utt> <speaker>' lines")
    p.add_argument("--level", choices=["speaker", "utterance"], default="speaker")
    p.add_argument("--dmin", type=float, default=0.3)
    p.add_argument("--max-attempts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--map", required=True, type=Path)
    p.set_defaults(func=cmd_anonymize)

    p = sub.add_parser("prosody", help="normalize or restore phone-wise prosody")
    p.add_argument("action", choices=["normalize", "denormalize"])
    p.add_argument("--in", dest="inp", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--stats", required=True, type=Path)
    p.set_defaults(func=cmd_prosody)

    p = sub.add_parser("score", help="cosine-score trials")
    p.add_argument("--trials", required=True, type=Path)
    p.add_argument("--enrollment", required=True, type=Path)
    p.add_argument("--embeddings", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eer", help="equal error rate of a score file (percent)")
    p.add_argument("--scores", required=True, type=Path)
    p.add_argument("--enrollment", type=Path, help="enables per-gender averaging")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eer)

    for name, per in (("wer", False), ("per", True)):
        p = sub.add_parser(name, help=f"corpus {name.upper()} of two transcript files (percent)")
        p.add_argument("--ref", required=True, type=Path)
        p.add_argument("--hyp", required=True, type=Path)
        if not per:
            p.add_argument("--no-normalize", action="store_true")
        p.add_argument("--json", action="store_true")
        p.set_defaults(func=lambda a, per=per: _error_rate(a, per))

    p = sub.add_parser("ablate", help="run evaluation conditions from a JSON run config")
    p.add_argument("--config", type=Path, help=f"default: ${CONFIG_ENV}")
    p.add_argument("--conditions", help="comma-separated subset of " + ",".join(CONDITION_ORDER))
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="render run results or trial counts")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--runs", type=Path)
    src.add_argument("--trial-files", nargs="+", metavar="DATASET/LANG=PATH")
    p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.version:
        sys.stderr.write(f"vpkit {__version__}\n")
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (VPKitError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
