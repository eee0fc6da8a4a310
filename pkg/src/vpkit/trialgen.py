"""Enrollment/trial speaker selection and trial-pair expansion.

Per language and gender a fixed number of enrollment speakers and extra
trial-only speakers are drawn. Each enrollment speaker's utterances are split
into an enrollment part (15 % or at least 5) and a trial part; every model is
then paired with every same-gender trial utterance.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import GENDERS, VPKitError, substream
from .ingest import Manifest, SpeakerModel, Trial, TrialSet, UtteranceRecord

log = logging.getLogger(__name__)


@dataclass
class TrialGenConfig:
    enroll_speakers_per_gender: int = 10
    extra_trial_speakers_per_gender: int = 5
    utterance_cap: int | None = None
    enroll_fraction: float = 0.15
    enroll_min: int = 5
    seed: int = 0

    def __post_init__(self):
        counts = (self.enroll_speakers_per_gender, self.extra_trial_speakers_per_gender, self.enroll_min)
        if any(c < 0 for c in counts):
            raise VPKitError("speaker and utterance counts must be >= 0")
        if self.utterance_cap is not None and self.utterance_cap < 1:
            raise VPKitError("utterance_cap must be >= 1")
        if not 0 < self.enroll_fraction < 1:
            raise VPKitError("enroll_fraction must be in (0, 1)")

    @classmethod
    def for_dataset(cls, dataset: str, **overrides) -> "TrialGenConfig":
        if dataset == "cv":
            overrides.setdefault("utterance_cap", 70)
        elif dataset != "libri":
            raise VPKitError(f"unknown dataset {dataset!r}")
        return cls(**overrides)


@dataclass
class GenderSelection:
    enrollment: list[str]
    trial_only: list[str]
    all_speakers: bool = False


@dataclass
class SpeakerSelection:
    genders: dict[str, GenderSelection]
    excluded: dict[str, list[str]] = field(default_factory=dict)


class InsufficientUtterances(VPKitError):
    """Raised when a speaker has too few utterances to be enrolled."""


def cap_utterances(
    utterances: Sequence[UtteranceRecord], cap: int, rng: np.random.Generator
) -> list[UtteranceRecord]:
    if cap < 1:
        raise VPKitError("cap must be >= 1")
    ordered = sorted(utterances, key=lambda r: r.utt)
    if len(ordered) <= cap:
        return ordered
    keep = np.sort(rng.choice(len(ordered), size=cap, replace=False))
    return [ordered[i] for i in keep]


def enrollment_size(n: int, fraction: float, minimum: int) -> int:
    # Fraction(repr(.)) keeps 0.15 * 20 at exactly 3, not 3.0000000000000004.
    return max(math.ceil(Fraction(repr(float(fraction))) * n), minimum)


def split_enrollment(
    utterances: Sequence[UtteranceRecord], config: TrialGenConfig, rng: np.random.Generator
) -> tuple[list[UtteranceRecord], list[UtteranceRecord]]:
    """Split one speaker's utterances into (enrollment, trial).

    Raises InsufficientUtterances when fewer than ``enroll_min + 1`` are
    available or the enrollment part would leave nothing for trials.
    """
    ordered = sorted(utterances, key=lambda r: r.utt)
    n = len(ordered)
    if n <= config.enroll_min:
        raise InsufficientUtterances(f"{n} utterances, need more than {config.enroll_min}")
    k = enrollment_size(n, config.enroll_fraction, config.enroll_min)
    if k >= n:
        raise InsufficientUtterances(f"enrollment of {k} leaves no trial utterances out of {n}")
    chosen = set(rng.choice(n, size=k, replace=False).tolist())
    enroll = [r for i, r in enumerate(ordered) if i in chosen]
    trial = [r for i, r in enumerate(ordered) if i not in chosen]
    return enroll, trial


def select_speakers(
    speakers_by_gender: dict[str, Sequence[str]] | Manifest,
    config: TrialGenConfig,
    language: str | None = None,
) -> SpeakerSelection:
    """Choose enrollment and trial-only speakers per gender.

    Every speaker gets a priority drawn from its own substream and the lowest
    priorities win, so adding a candidate displaces at most one existing
    choice. If a gender has fewer candidates than requested, every speaker is
    used for both enrollment and trials (flagged ``all_speakers``).
    """
    if isinstance(speakers_by_gender, Manifest):
        language = language or speakers_by_gender.language
        grouped: dict[str, list[str]] = {}
        for spk, gender in speakers_by_gender.speaker_genders().items():
            grouped.setdefault(gender, []).append(spk)
        speakers_by_gender = grouped
    language = language or "other"
    wanted = config.enroll_speakers_per_gender + config.extra_trial_speakers_per_gender
    out = {}
    for gender in GENDERS:
        candidates = sorted(set(speakers_by_gender.get(gender, ())))
        if not candidates:
            raise VPKitError(f"no {gender} speakers available for {language}")
        if len(candidates) < wanted:
            out[gender] = GenderSelection(candidates, [], all_speakers=True)
            continue
        priority = {
            spk: substream(config.seed, language, gender, spk, "select").random()
            for spk in candidates
        }
        ranked = sorted(candidates, key=lambda s: (priority[s], s))
        n_enroll = config.enroll_speakers_per_gender
        out[gender] = GenderSelection(
            sorted(ranked[:n_enroll]), sorted(ranked[n_enroll:wanted])
        )
    return SpeakerSelection(out)


def build_trials(
    selection: SpeakerSelection,
    splits: dict[str, tuple[list[UtteranceRecord], list[UtteranceRecord]]],
    trial_only_utts: dict[str, list[UtteranceRecord]],
) -> TrialSet:
    """Cartesian same-gender expansion of models against trial utterances.

    ``splits`` maps enrollment speakers to (enrollment, trial) records;
    ``trial_only_utts`` maps trial-only speakers to all their records. Model
    IDs are the speaker IDs.
    """
    models: dict[str, SpeakerModel] = {}
    pairs: list[Trial] = []
    for gender, sel in selection.genders.items():
        pool: list[tuple[str, str]] = []
        gender_models = []
        for spk in sel.enrollment:
            if spk not in splits:
                continue
            enroll, trial = splits[spk]
            models[spk] = SpeakerModel(spk, gender, tuple(r.utt for r in enroll))
            gender_models.append(spk)
            pool.extend((r.utt, spk) for r in trial)
        for spk in sel.trial_only:
            pool.extend((r.utt, spk) for r in trial_only_utts.get(spk, ()))
        if not gender_models:
            continue
        if not pool:
            raise VPKitError(f"empty trial utterance pool for {gender}")
        for model in gender_models:
            for utt, spk in pool:
                pairs.append(Trial(model, utt, "target" if spk == model else "nontarget"))
    return TrialSet(dict(sorted(models.items())), sorted(pairs))


def generate_trials(manifest: Manifest, config: TrialGenConfig) -> tuple[TrialSet, dict]:
    """Full pipeline: cap, filter, select, split, expand. Returns trials and a summary."""
    lang = manifest.language
    groups = manifest.by_speaker()
    genders = manifest.speaker_genders()

    capped = {}
    for spk, recs in groups.items():
        if config.utterance_cap is not None:
            rng = substream(config.seed, lang, genders[spk], spk, "cap")
            recs = cap_utterances(recs, config.utterance_cap, rng)
        capped[spk] = recs

    excluded: dict[str, list[str]] = {g: [] for g in GENDERS}
    eligible: dict[str, list[str]] = {g: [] for g in GENDERS}
    for spk, recs in capped.items():
        n = len(recs)
        k = enrollment_size(n, config.enroll_fraction, config.enroll_min)
        if n <= config.enroll_min or k >= n:
            log.warning("excluding speaker %s: only %d utterances", spk, n)
            excluded[genders[spk]].append(spk)
        else:
            eligible[genders[spk]].append(spk)

    selection = select_speakers(eligible, config, lang)
    selection.excluded = excluded

    splits = {}
    trial_only = {}
    for gender, sel in selection.genders.items():
        for spk in sel.enrollment:
            rng = substream(config.seed, lang, gender, spk, "split")
            splits[spk] = split_enrollment(capped[spk], config, rng)
        for spk in sel.trial_only:
            trial_only[spk] = capped[spk]

    trials = build_trials(selection, splits, trial_only)
    return trials, summarize(trials, selection)


def summarize(trials: TrialSet, selection: SpeakerSelection) -> dict:
    summary = {}
    for gender in GENDERS:
        models = [m for m, spec in trials.models.items() if spec.gender == gender]
        model_set = set(models)
        pairs = [p for p in trials.pairs if p.model in model_set]
        sel = selection.genders.get(gender)
        summary[gender] = {
            "models": len(models),
            "pairs": len(pairs),
            "targets": sum(p.label == "target" for p in pairs),
            "excluded_speakers": len(selection.excluded.get(gender, [])),
            "all_speakers_mode": bool(sel and sel.all_speakers),
        }
    return summary
