"""Replace speaker embeddings with artificial ones under a cosine-distance floor.

Targets are sampled with replacement from an externally generated pool.
Speaker-level policies pick one target per speaker per session (the manifest
passed in); utterance-level policies pick independently per utterance.

Substream keys: ``(seed, "speaker", speaker_id)`` and
``(seed, "utterance", utt_id)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import FormatError, VPKitError, direction, substream, unit_rows
from .ingest import EmbeddingTable


@dataclass
class ArtificialPool:
    table: EmbeddingTable
    provenance: str = "external generator export"

    def __post_init__(self):
        if len(self.table) == 0:
            raise VPKitError("empty artificial pool")
        self.ids = self.table.keys()
        self._units = unit_rows(self.table.matrix(self.ids))

    def distances(self, original: np.ndarray) -> np.ndarray:
        original = np.asarray(original, dtype=np.float64).reshape(-1)
        if original.size != self.table.dim:
            raise VPKitError(
                f"dimension mismatch: pool dim {self.table.dim}, original {original.size}"
            )
        sims = np.clip(self._units @ direction(original), -1.0, 1.0)
        return 1.0 - sims


@dataclass(frozen=True)
class AnonymizationPolicy:
    level: str = "speaker"
    d_min: float = 0.3
    max_attempts: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.level not in ("speaker", "utterance"):
            raise VPKitError(f"level must be speaker or utterance, got {self.level!r}")
        if not 0.0 <= self.d_min <= 2.0:
            raise VPKitError("d_min must lie in [0, 2]")
        if self.max_attempts < 1:
            raise VPKitError("max_attempts must be >= 1")


@dataclass(frozen=True)
class Selection:
    artificial_id: str
    distance: float
    fallback: bool


SESSION_SCOPE = "one manifest = one session"


@dataclass
class AssignmentMap:
    """Selections keyed by speaker (speaker level) or utterance (utterance level)."""

    policy: AnonymizationPolicy
    entries: dict[str, Selection]
    utterance_keys: dict[str, str] = field(default_factory=dict)
    session: str = SESSION_SCOPE

    def target_for(self, utt: str) -> Selection:
        return self.entries[self.utterance_keys[utt]]

    def __eq__(self, other):
        if not isinstance(other, AssignmentMap):
            return NotImplemented
        return (
            self.policy == other.policy
            and self.entries == other.entries
            and self.utterance_keys == other.utterance_keys
        )


def select_anonymous(
    original, pool: ArtificialPool, d_min: float, max_attempts: int, rng: np.random.Generator
) -> Selection:
    dists = pool.distances(original)
    for _ in range(max_attempts):
        idx = int(rng.integers(len(pool.ids)))
        if dists[idx] >= d_min:
            return Selection(pool.ids[idx], float(dists[idx]), False)
    best = int(np.argmax(dists))
    return Selection(pool.ids[best], float(dists[best]), True)


def speaker_reference(embeddings: EmbeddingTable, utts: list[str]) -> np.ndarray:
    """Renormalized mean of a speaker's utterance embeddings."""
    total = np.sum(embeddings.matrix(sorted(utts)), axis=0)
    if not np.any(total):
        raise VPKitError("speaker embeddings cancel to zero")
    return direction(total)


def assign_targets(
    embeddings: EmbeddingTable,
    utt2spk: Mapping[str, str],
    policy: AnonymizationPolicy,
    pool: ArtificialPool,
) -> AssignmentMap:
    if embeddings.dim != pool.table.dim:
        raise VPKitError(f"dimension mismatch: embeddings {embeddings.dim}, pool {pool.table.dim}")
    utts = embeddings.keys()
    missing = [u for u in utts if u not in utt2spk]
    if missing:
        raise VPKitError(f"no speaker mapping for {len(missing)} utterances, e.g. {missing[:5]}")

    entries: dict[str, Selection] = {}
    keys: dict[str, str] = {}
    if policy.level == "speaker":
        by_spk: dict[str, list[str]] = {}
        for utt in utts:
            by_spk.setdefault(utt2spk[utt], []).append(utt)
        for spk in sorted(by_spk):
            ref = speaker_reference(embeddings, by_spk[spk])
            rng = substream(policy.seed, "speaker", spk)
            entries[spk] = select_anonymous(ref, pool, policy.d_min, policy.max_attempts, rng)
            for utt in by_spk[spk]:
                keys[utt] = spk
    else:
        for utt in utts:
            rng = substream(policy.seed, "utterance", utt)
            entries[utt] = select_anonymous(
                embeddings[utt], pool, policy.d_min, policy.max_attempts, rng
            )
            keys[utt] = utt
    return AssignmentMap(policy, entries, keys)


def apply_assignment(
    embeddings: EmbeddingTable, assignment: AssignmentMap, pool: ArtificialPool
) -> EmbeddingTable:
    uncovered = [u for u in embeddings.keys() if u not in assignment.utterance_keys]
    if uncovered:
        raise VPKitError(f"assignment does not cover {len(uncovered)} keys, e.g. {uncovered[:5]}")
    return EmbeddingTable(
        pool.table.dim,
        {u: pool.table[assignment.target_for(u).artificial_id] for u in embeddings.keys()},
    )


def write_assignment(assignment: AssignmentMap, path) -> None:
    """``key<TAB>artificial-id<TAB>distance<TAB>fallback`` rows, sorted by key."""
    lines = [
        f"{key}\t{sel.artificial_id}\t{sel.distance:.9g}\t{'yes' if sel.fallback else 'no'}\n"
        for key, sel in sorted(assignment.entries.items())
    ]
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


def read_assignment(path) -> dict[str, Selection]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4 or parts[3] not in ("yes", "no"):
                raise FormatError("expected 'key<TAB>id<TAB>distance<TAB>yes|no'", path, lineno)
            try:
                dist = float(parts[2])
            except ValueError:
                raise FormatError(f"non-numeric distance {parts[2]!r}", path, lineno) from None
            out[parts[0]] = Selection(parts[1], dist, parts[3] == "yes")
    return out
