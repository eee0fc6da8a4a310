"""Privacy (EER) and utility (WER/PER) metrics, plus cosine trial scoring."""
from __future__ import annotations

import logging
import re
import unicodedata
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import GENDERS, VPKitError, direction, unit_rows
from .ingest import EmbeddingTable, ScoredTrial, TranscriptSet, TrialSet

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ scoring


def score_trials(trials: TrialSet, embeddings: EmbeddingTable) -> list[ScoredTrial]:
    """Cosine-score every pair against the renormalized mean enrollment embedding."""
    model_ids = sorted({p.model for p in trials.pairs})
    unknown = [m for m in model_ids if m not in trials.models]
    if unknown:
        raise VPKitError(f"pairs reference models without enrollment: {unknown[:10]}")
    trial_utts = sorted({p.utt for p in trials.pairs})
    needed = set(trial_utts)
    for m in model_ids:
        needed.update(trials.models[m].enrollment)
    missing = sorted(u for u in needed if u not in embeddings)
    if missing:
        raise VPKitError(f"missing embeddings for {len(missing)} utterances: {missing[:10]}")
    if not trials.pairs:
        return []

    model_vecs = np.stack(
        [
            direction(np.sum(embeddings.matrix(sorted(trials.models[m].enrollment)), axis=0))
            for m in model_ids
        ]
    )
    utt_vecs = unit_rows(embeddings.matrix(trial_utts))
    m_index = {m: i for i, m in enumerate(model_ids)}
    u_index = {u: i for i, u in enumerate(trial_utts)}
    mi = np.fromiter((m_index[p.model] for p in trials.pairs), dtype=np.int64, count=len(trials.pairs))
    ui = np.fromiter((u_index[p.utt] for p in trials.pairs), dtype=np.int64, count=len(trials.pairs))
    scores = np.clip(np.einsum("ij,ij->i", model_vecs[mi], utt_vecs[ui]), -1.0, 1.0)
    return [
        ScoredTrial(p.model, p.utt, float(s), p.label) for p, s in zip(trials.pairs, scores)
    ]


# ---------------------------------------------------------------------- EER


@dataclass(frozen=True)
class EERResult:
    eer: float
    threshold: float


def split_by_label(scored: Iterable[ScoredTrial]) -> tuple[np.ndarray, np.ndarray]:
    tgt, non = [], []
    for s in scored:
        (tgt if s.label == "target" else non).append(s.score)
    return np.asarray(tgt, dtype=np.float64), np.asarray(non, dtype=np.float64)


def compute_eer(target_scores, nontarget_scores) -> EERResult:
    """Equal error rate of a cosine verifier.

    FAR(t) is the fraction of nontargets scoring >= t and FRR(t) the fraction
    of targets scoring < t. Operating points sit at every distinct score plus
    one point above the maximum (FAR 0, FRR 1). The EER is taken where the
    polyline through consecutive operating points crosses FAR == FRR.
    """
    tgt = np.sort(np.asarray(target_scores, dtype=np.float64).ravel())
    non = np.sort(np.asarray(nontarget_scores, dtype=np.float64).ravel())
    if tgt.size == 0 or non.size == 0:
        raise VPKitError("EER needs at least one target and one nontarget score")
    if not (np.all(np.isfinite(tgt)) and np.all(np.isfinite(non))):
        raise VPKitError("scores must be finite")
    thresholds = np.unique(np.concatenate([tgt, non]))
    thresholds = np.append(thresholds, np.nextafter(thresholds[-1], np.inf))
    far = (non.size - np.searchsorted(non, thresholds, side="left")) / non.size
    frr = np.searchsorted(tgt, thresholds, side="left") / tgt.size
    gap = frr - far
    i = int(np.argmax(gap >= 0))
    if gap[i] == 0:
        return EERResult(float(far[i]), float(thresholds[i]))
    # gap[0] == -1, so i >= 1 and the crossing lies strictly inside [i-1, i]
    lam = -gap[i - 1] / (gap[i] - gap[i - 1])
    eer = far[i - 1] + lam * (far[i] - far[i - 1])
    thr = thresholds[i - 1] + lam * (thresholds[i] - thresholds[i - 1])
    return EERResult(float(eer), float(thr))


def flip_rule(raw_eer: float) -> tuple[float, bool]:
    """Report 1 - EER above 0.5, since an attacker could invert its decisions."""
    if not 0.0 <= raw_eer <= 1.0:
        raise VPKitError(f"raw EER must be in [0, 1], got {raw_eer}")
    if raw_eer > 0.5:
        return 1.0 - raw_eer, True
    return raw_eer, False


def gender_average(eer_female: float | None, eer_male: float | None) -> float:
    if eer_female is None and eer_male is None:
        raise VPKitError("no EER for either gender")
    if eer_female is None or eer_male is None:
        log.warning("only one gender available; reporting its EER unaveraged")
        return eer_male if eer_female is None else eer_female
    return (eer_female + eer_male) / 2


@dataclass
class ErrorRateReport:
    eer_female: float | None = None
    eer_male: float | None = None
    eer_avg: float | None = None
    raw_eer: dict[str, float] = field(default_factory=dict)
    flipped: dict[str, bool] = field(default_factory=dict)
    single_gender: bool = False
    wer: float | None = None
    per: float | None = None
    counts: dict[str, int] = field(default_factory=dict)


def privacy_report(scored: Sequence[ScoredTrial], model_genders: Mapping[str, str]) -> ErrorRateReport:
    """Per-gender reported EERs and their average."""
    report = ErrorRateReport()
    per_gender = {}
    n_tgt = n_non = 0
    for gender in GENDERS:
        subset = [s for s in scored if model_genders.get(s.model) == gender]
        if not subset:
            continue
        tgt, non = split_by_label(subset)
        if tgt.size == 0 or non.size == 0:
            log.warning("%s trials lack one class; skipped", gender)
            continue
        raw = compute_eer(tgt, non).eer
        reported, flipped = flip_rule(raw)
        report.raw_eer[gender] = raw
        report.flipped[gender] = flipped
        per_gender[gender] = reported
        n_tgt += tgt.size
        n_non += non.size
    unassigned = [s.model for s in scored if s.model not in model_genders]
    if unassigned:
        raise VPKitError(f"no gender known for models {sorted(set(unassigned))[:10]}")
    report.eer_female = per_gender.get("female")
    report.eer_male = per_gender.get("male")
    report.eer_avg = gender_average(report.eer_female, report.eer_male)
    report.single_gender = len(per_gender) == 1
    report.counts.update({"target": n_tgt, "nontarget": n_non})
    return report


# -------------------------------------------------------------- error rates


@dataclass(frozen=True)
class EditCounts:
    substitutions: int
    deletions: int
    insertions: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def __iter__(self):
        return iter((self.substitutions, self.deletions, self.insertions))


def edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> EditCounts:
    """Minimal (S, D, I) under unit costs.

    Among optimal alignments the backtrace prefers a substitution/match, then
    a deletion, then an insertion. Only the cost and deletion count are
    carried per cell; insertions follow from len(ref) - len(hyp) = D - I.
    """
    n, m = len(ref), len(hyp)
    if n == m and list(ref) == list(hyp):
        return EditCounts(0, 0, 0)
    prev_cost = list(range(m + 1))
    prev_del = [0] * (m + 1)
    for i in range(1, n + 1):
        r = ref[i - 1]
        cost = [i] + [0] * m
        dels = [i] + [0] * m
        for j in range(1, m + 1):
            diag = prev_cost[j - 1] + (r != hyp[j - 1])
            up = prev_cost[j] + 1
            left = cost[j - 1] + 1
            if diag <= up and diag <= left:
                cost[j] = diag
                dels[j] = prev_del[j - 1]
            elif up <= left:
                cost[j] = up
                dels[j] = prev_del[j] + 1
            else:
                cost[j] = left
                dels[j] = dels[j - 1]
        prev_cost, prev_del = cost, dels
    total, d = prev_cost[m], prev_del[m]
    ins = d - (n - m)
    return EditCounts(total - d - ins, d, ins)


_SPACE = re.compile(r"\s+")


class _PunctuationTable(dict):
    """``str.translate`` table deleting category P* code points, filled on demand."""

    def __missing__(self, code):
        value = None if unicodedata.category(chr(code)).startswith("P") else code
        self[code] = value
        return value


_DROP_PUNCT = _PunctuationTable()


def normalize_text(text: str) -> str:
    """NFKC, lowercase, drop Unicode punctuation (category P*), collapse spaces."""
    text = unicodedata.normalize("NFKC", text).lower().translate(_DROP_PUNCT)
    return _SPACE.sub(" ", text).strip()


@dataclass
class CorpusErrorRate:
    rate: float
    substitutions: int
    deletions: int
    insertions: int
    ref_tokens: int
    per_utterance: dict[str, EditCounts]

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def edit_distance_batch(pairs: Sequence[tuple[Sequence[str], Sequence[str]]], chunk: int = 512) -> list[EditCounts]:
    """``edit_distance`` over many pairs at once.

    Pairs are bucketed by length and each bucket runs the same DP and tie
    rule with numpy, one cell column at a time across the whole bucket.
    """
    out: list[EditCounts | None] = [None] * len(pairs)
    order = sorted(range(len(pairs)), key=lambda k: (len(pairs[k][0]), len(pairs[k][1])))
    for start in range(0, len(order), chunk):
        idx = order[start : start + chunk]
        for k, counts in zip(idx, _edit_bucket([pairs[k] for k in idx])):
            out[k] = counts
    return out  # type: ignore[return-value]


def _edit_bucket(pairs):
    vocab: dict = {}
    n = np.array([len(r) for r, _ in pairs])
    m = np.array([len(h) for _, h in pairs])
    B, N, M = len(pairs), int(n.max()), int(m.max())
    ref = np.full((B, N), -1, dtype=np.int64)
    hyp = np.full((B, M), -2, dtype=np.int64)
    for b, (r, h) in enumerate(pairs):
        ref[b, : len(r)] = [vocab.setdefault(t, len(vocab)) for t in r]
        hyp[b, : len(h)] = [vocab.setdefault(t, len(vocab)) for t in h]

    rows = np.arange(B)
    prev_cost = np.tile(np.arange(M + 1), (B, 1))
    prev_del = np.zeros((B, M + 1), dtype=np.int64)
    total = np.where(n == 0, m, 0)
    dels = np.zeros(B, dtype=np.int64)
    for i in range(1, N + 1):
        cost = np.empty_like(prev_cost)
        dl = np.empty_like(prev_del)
        cost[:, 0] = i
        dl[:, 0] = i
        mismatch = ref[:, i - 1 : i] != hyp
        for j in range(1, M + 1):
            diag = prev_cost[:, j - 1] + mismatch[:, j - 1]
            up = prev_cost[:, j] + 1
            left = cost[:, j - 1] + 1
            take_diag = (diag <= up) & (diag <= left)
            take_up = ~take_diag & (up <= left)
            cost[:, j] = np.where(take_diag, diag, np.where(take_up, up, left))
            dl[:, j] = np.where(take_diag, prev_del[:, j - 1], np.where(take_up, prev_del[:, j] + 1, dl[:, j - 1]))
        done = n == i
        total[done] = cost[rows[done], m[done]]
        dels[done] = dl[rows[done], m[done]]
        prev_cost, prev_del = cost, dl
    ins = dels - (n - m)
    subs = total - dels - ins
    return [EditCounts(int(s), int(d), int(x)) for s, d, x in zip(subs, dels, ins)]


def _edit_batch(pairs):
    return edit_distance_batch(pairs)


def corpus_error_rate(
    pairs: Mapping[str, tuple[Sequence[str], Sequence[str]]], jobs: int = 1
) -> CorpusErrorRate:
    """Pooled rate: total edits over total reference tokens."""
    keys = sorted(pairs)
    items = [pairs[k] for k in keys]
    if jobs > 1 and len(items) > 1000:
        size = -(-len(items) // jobs)
        chunks = [items[i : i + size] for i in range(0, len(items), size)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            counts = [c for part in ex.map(_edit_batch, chunks) for c in part]
    else:
        counts = _edit_batch(items)
    ref_tokens = sum(len(r) for r, _ in items)
    if ref_tokens == 0:
        raise VPKitError("references contain no tokens")
    s = sum(c.substitutions for c in counts)
    d = sum(c.deletions for c in counts)
    i = sum(c.insertions for c in counts)
    return CorpusErrorRate((s + d + i) / ref_tokens, s, d, i, ref_tokens, dict(zip(keys, counts)))


def _check_keys(refs: TranscriptSet, hyps: TranscriptSet):
    if refs.entries.keys() != hyps.entries.keys():
        only_ref = sorted(refs.entries.keys() - hyps.entries.keys())
        only_hyp = sorted(hyps.entries.keys() - refs.entries.keys())
        raise VPKitError(
            f"utterance keys differ: {len(only_ref)} only in refs {only_ref[:5]}, "
            f"{len(only_hyp)} only in hyps {only_hyp[:5]}"
        )


def compute_wer(
    refs: TranscriptSet,
    hyps: TranscriptSet,
    normalizer: Callable[[str], str] | None = normalize_text,
    jobs: int = 1,
) -> CorpusErrorRate:
    _check_keys(refs, hyps)
    norm = normalizer or (lambda t: t)
    pairs = {
        k: (norm(refs.entries[k].text).split(), norm(hyps.entries[k].text).split())
        for k in refs.entries
    }
    return corpus_error_rate(pairs, jobs)


def compute_per(refs: TranscriptSet, hyps: TranscriptSet, jobs: int = 1) -> CorpusErrorRate:
    _check_keys(refs, hyps)
    missing = sorted(
        k for k in refs.entries if refs.entries[k].phones is None or hyps.entries[k].phones is None
    )
    if missing:
        raise VPKitError(f"phones missing for {len(missing)} utterances: {missing[:5]}")
    pairs = {k: (refs.entries[k].phones.split(), hyps.entries[k].phones.split()) for k in refs.entries}
    return corpus_error_rate(pairs, jobs)


def percent(value: float | None) -> str:
    return "n/a" if value is None else f"{100 * value:.2f}"
