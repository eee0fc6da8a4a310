"""Phone-wise prosody normalization by the per-utterance sequence mean.

Pitch zeros mark unvoiced phones: they are left out of the pitch mean and
stay zero after normalization. Energy and duration use every entry.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FormatError, VPKitError

CHANNELS = ("pitch", "energy", "duration")


@dataclass
class ProsodySequence:
    phones: list[str]
    pitch: np.ndarray
    energy: np.ndarray
    duration: np.ndarray
    duration_unit: str = "frames"

    def __post_init__(self):
        self.pitch = np.asarray(self.pitch, dtype=np.float64)
        self.energy = np.asarray(self.energy, dtype=np.float64)
        self.duration = np.asarray(self.duration, dtype=np.float64)
        n = len(self.phones)
        if n < 1:
            raise VPKitError("prosody sequence must contain at least one phone")
        for name in CHANNELS:
            values = getattr(self, name)
            if values.shape != (n,):
                raise VPKitError(f"{name} has length {values.size}, expected {n}")
            if not np.all(np.isfinite(values)):
                raise VPKitError(f"{name} contains non-finite values")
        if np.any(self.duration <= 0):
            raise VPKitError("durations must be > 0")
        if np.any(self.pitch < 0) or np.any(self.energy < 0):
            raise VPKitError("pitch and energy must be >= 0")


@dataclass
class NormalizedProsody:
    phones: list[str]
    pitch: np.ndarray
    energy: np.ndarray
    duration: np.ndarray
    stats: dict[str, float] | None
    duration_unit: str = "frames"


def _included(name: str, values: np.ndarray) -> np.ndarray:
    if name == "pitch":
        return values > 0
    return np.ones(values.shape, dtype=bool)


def normalize(seq: ProsodySequence) -> NormalizedProsody:
    stats = {}
    out = {}
    for name in CHANNELS:
        values = getattr(seq, name)
        mask = _included(name, values)
        mean = float(np.mean(values[mask])) if mask.any() else 0.0
        if mean <= 0:
            raise VPKitError(f"{name} channel has zero mean; cannot normalize")
        stats[name] = mean
        normed = np.zeros_like(values)
        normed[mask] = values[mask] / mean
        out[name] = normed
    return NormalizedProsody(list(seq.phones), out["pitch"], out["energy"], out["duration"],
                             stats, seq.duration_unit)


def denormalize(norm: NormalizedProsody) -> ProsodySequence:
    if not norm.stats or any(name not in norm.stats for name in CHANNELS):
        raise VPKitError("normalization stats missing")
    values = {name: getattr(norm, name) * norm.stats[name] for name in CHANNELS}
    return ProsodySequence(list(norm.phones), values["pitch"], values["energy"],
                           values["duration"], norm.duration_unit)


def read_prosody(path) -> dict[str, ProsodySequence]:
    """Read ``utt<TAB>phone<TAB>pitch<TAB>energy<TAB>duration`` rows grouped by utterance."""
    rows: dict[str, list[tuple]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise FormatError("expected 5 tab-separated columns", path, lineno)
            try:
                nums = tuple(float(x) for x in parts[2:])
            except ValueError:
                raise FormatError("non-numeric prosody value", path, lineno) from None
            rows.setdefault(parts[0], []).append((parts[1],) + nums)
    out = {}
    for utt, items in rows.items():
        phones, pitch, energy, dur = zip(*items)
        try:
            out[utt] = ProsodySequence(list(phones), pitch, energy, dur)
        except VPKitError as exc:
            raise FormatError(f"utterance {utt}: {exc}", path) from None
    return out


def write_prosody(sequences, path) -> None:
    lines = []
    for utt in sorted(sequences):
        seq = sequences[utt]
        for i, phone in enumerate(seq.phones):
            lines.append(
                f"{utt}\t{phone}\t{float(seq.pitch[i])!r}\t{float(seq.energy[i])!r}\t{float(seq.duration[i])!r}\n"
            )
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


def write_stats(normalized, path) -> None:
    lines = [
        f"{utt}\t{float(n.stats['pitch'])!r}\t{float(n.stats['energy'])!r}\t{float(n.stats['duration'])!r}\n"
        for utt, n in sorted(normalized.items())
    ]
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


def read_stats(path) -> dict[str, dict[str, float]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise FormatError("expected 'utt<TAB>pitch<TAB>energy<TAB>duration'", path, lineno)
            try:
                out[parts[0]] = dict(zip(CHANNELS, (float(x) for x in parts[1:])))
            except ValueError:
                raise FormatError("non-numeric statistic", path, lineno) from None
    return out
