"""Readers and writers for manifests, embeddings, trials, scores and transcripts.

All text formats are UTF-8 with LF line endings. Writers sort their output so
identical content always produces identical bytes.
"""
from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import (
    GENDERS,
    LABELS,
    FormatError,
    VPKitError,
    as_vector,
    check_language,
)

log = logging.getLogger(__name__)

MAGIC = b"VPEB"
VERSION = 1
SPEAKER_PREFIX_LEN = 16


# ---------------------------------------------------------------- manifests


@dataclass(frozen=True)
class UtteranceRecord:
    utt: str
    speaker: str
    gender: str
    language: str
    text: str = ""
    phones: str | None = None
    duration_s: float | None = None
    audio: str | None = None


@dataclass
class Manifest:
    dataset: str
    language: str
    records: list[UtteranceRecord]
    dropped: int = 0

    def __post_init__(self):
        if self.dataset not in ("libri", "cv"):
            raise VPKitError(f"dataset must be 'libri' or 'cv', got {self.dataset!r}")
        if not self.records:
            raise VPKitError("manifest has no records")
        seen = set()
        for rec in self.records:
            if rec.language != self.language:
                raise VPKitError(
                    f"record {rec.utt} has language {rec.language}, manifest is {self.language}"
                )
            if rec.utt in seen:
                raise VPKitError(f"duplicate utterance id {rec.utt}")
            seen.add(rec.utt)

    def by_speaker(self) -> dict[str, list[UtteranceRecord]]:
        groups: dict[str, list[UtteranceRecord]] = {}
        for rec in sorted(self.records, key=lambda r: r.utt):
            groups.setdefault(rec.speaker, []).append(rec)
        return dict(sorted(groups.items()))

    def speaker_genders(self) -> dict[str, str]:
        return {rec.speaker: rec.gender for rec in self.records}

    def utt2spk(self) -> dict[str, str]:
        return {rec.utt: rec.speaker for rec in self.records}


def _normalize_gender(raw: str) -> str | None:
    # CV 16.1 uses male/female; later releases use male_masculine etc.
    value = raw.strip().lower()
    for g in GENDERS:
        if value == g or value.startswith(g + "_"):
            return g
    return None


def _parse_cv_tsv(path: Path, language: str) -> Manifest:
    required = ("client_id", "path", "sentence", "gender")
    records = []
    dropped = 0
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty file", path, 1) from None
        missing = [c for c in required if c not in header]
        if missing:
            raise FormatError(f"missing columns {missing}", path, 1)
        col = {name: header.index(name) for name in required}
        for row in reader:
            lineno = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise FormatError(
                    f"expected {len(header)} columns, got {len(row)}", path, lineno
                )
            client = row[col["client_id"]].strip()
            clip = row[col["path"]].strip()
            if not client or not clip:
                raise FormatError("empty client_id or path", path, lineno)
            gender = _normalize_gender(row[col["gender"]])
            if gender is None:
                dropped += 1
                continue
            records.append(
                UtteranceRecord(
                    utt=Path(clip).stem,
                    speaker=client[:SPEAKER_PREFIX_LEN],
                    gender=gender,
                    language=language,
                    text=row[col["sentence"]],
                    audio=clip,
                )
            )
    if not records:
        raise FormatError("no usable records", path)
    if dropped:
        log.info("%s: dropped %d rows without gender", path, dropped)
    return Manifest("cv", language, records, dropped)


def read_speaker_meta(path) -> dict[str, str]:
    """Sidecar ``speaker-id TAB gender`` file used for Libri-style data."""
    genders = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError("expected 'speaker<TAB>gender'", path, lineno)
            gender = _normalize_gender(parts[1])
            if gender is None:
                raise FormatError(f"unknown gender {parts[1]!r}", path, lineno)
            genders[parts[0].strip()] = gender
    return genders


def _parse_libri_dir(root: Path, language: str, speaker_meta) -> Manifest:
    meta_path = Path(speaker_meta) if speaker_meta else root / "speakers.tsv"
    if not meta_path.exists():
        raise FormatError("speaker metadata file not found", meta_path)
    genders = read_speaker_meta(meta_path)
    records = []
    dropped = 0
    for trans in sorted(root.rglob("*.trans.txt")):
        rel = trans.relative_to(root)
        if len(rel.parts) < 2:
            raise FormatError("transcript must live under a speaker directory", trans)
        speaker = rel.parts[0]
        with open(trans, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                utt, sep, text = line.partition(" ")
                if not utt:
                    raise FormatError("missing utterance id", trans, lineno)
                if speaker not in genders:
                    dropped += 1
                    continue
                audio = str(trans.parent.relative_to(root) / f"{utt}.flac")
                records.append(
                    UtteranceRecord(
                        utt=utt,
                        speaker=speaker,
                        gender=genders[speaker],
                        language=language,
                        text=text,
                        audio=audio,
                    )
                )
    if not records:
        raise FormatError("no usable records", root)
    return Manifest("libri", language, records, dropped)


def parse_manifest(path, format: str, language: str, speaker_meta=None) -> Manifest:
    """Parse a CommonVoice TSV (``cv_tsv``) or a Libri-style tree (``libri_dir``).

    Libri trees hold ``<speaker>/<chapter>/*.trans.txt`` files whose lines are
    ``<utt-id> <text>``; genders come from a ``speaker<TAB>gender`` sidecar
    (``speakers.tsv`` in the root unless given). Rows without a usable gender
    are dropped and counted in ``Manifest.dropped``.
    """
    check_language(language)
    path = Path(path)
    if format == "cv_tsv":
        return _parse_cv_tsv(path, language)
    if format == "libri_dir":
        if not path.is_dir():
            raise FormatError("not a directory", path)
        return _parse_libri_dir(path, language, speaker_meta)
    raise VPKitError(f"unknown manifest format {format!r}")


# --------------------------------------------------------------- embeddings


@dataclass
class EmbeddingTable:
    """Fixed-dimension vectors keyed by utterance, speaker or pool ID.

    Values are held as float64 copies of the float32 payloads so reductions
    run in double precision.
    """

    dim: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise VPKitError("dim must be >= 1")
        self.entries = {k: as_vector(v) for k, v in self.entries.items()}
        for key, vec in self.entries.items():
            if vec.size != self.dim:
                raise VPKitError(
                    f"dimension mismatch for {key!r}: table dim {self.dim}, vector {vec.size}"
                )

    @classmethod
    def from_dict(cls, entries: Mapping[str, Iterable[float]]) -> "EmbeddingTable":
        if not entries:
            raise VPKitError("empty embedding table")
        first = np.asarray(next(iter(entries.values())))
        return cls(first.size, dict(entries))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def __getitem__(self, key) -> np.ndarray:
        return self.entries[key]

    def keys(self) -> list[str]:
        return sorted(self.entries)

    def matrix(self, keys: Iterable[str]) -> np.ndarray:
        keys = list(keys)
        if not keys:
            return np.empty((0, self.dim))
        return np.stack([self.entries[k] for k in keys])

    def scaled(self, factor: float) -> "EmbeddingTable":
        return EmbeddingTable(self.dim, {k: v * factor for k, v in self.entries.items()})


def write_embeddings(table: EmbeddingTable, path) -> None:
    if len(table) == 0:
        raise VPKitError("refusing to write an empty embedding table")
    chunks = [MAGIC, struct.pack("<BII", VERSION, table.dim, len(table))]
    for key in table.keys():
        vec = table[key]
        if vec.size != table.dim:
            raise VPKitError(f"dimension mismatch for {key!r}")
        raw = key.encode("utf-8")
        if not raw or len(raw) > 0xFFFF:
            raise VPKitError(f"invalid key length for {key!r}")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(np.asarray(vec, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_embeddings(path) -> EmbeddingTable:
    data = Path(path).read_bytes()
    if len(data) < 13 or data[:4] != MAGIC:
        raise FormatError("bad magic", path)
    version, dim, count = struct.unpack_from("<BII", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", path)
    if dim < 1:
        raise FormatError("dim must be >= 1", path)
    pos = 13
    entries: dict[str, np.ndarray] = {}
    vec_bytes = 4 * dim
    for index in range(count):
        if pos + 2 > len(data):
            raise FormatError(f"truncated before record {index}", path)
        (klen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + klen + vec_bytes > len(data):
            raise FormatError(
                f"record {index}: payload shorter than header dim {dim}", path
            )
        key = data[pos : pos + klen].decode("utf-8")
        pos += klen
        if key in entries:
            raise FormatError(f"duplicate key {key!r} (record {index})", path)
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=pos).astype(np.float64)
        pos += vec_bytes
        try:
            entries[key] = as_vector(vec)
        except VPKitError as exc:
            raise FormatError(f"record {index} ({key!r}): {exc}", path) from None
    if pos != len(data):
        raise FormatError(
            f"{len(data) - pos} trailing bytes; payload does not match header dim/count",
            path,
        )
    return EmbeddingTable(dim, entries)


# ------------------------------------------------------------------- trials


@dataclass(frozen=True)
class SpeakerModel:
    speaker: str
    gender: str
    enrollment: tuple[str, ...]


@dataclass(frozen=True, order=True)
class Trial:
    model: str
    utt: str
    label: str


@dataclass
class TrialSet:
    """Enrollment models plus (model, utterance, label) pairs.

    ``models`` may be empty when only a bare trial file was read.
    """

    models: dict[str, SpeakerModel] = field(default_factory=dict)
    pairs: list[Trial] = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, TrialSet):
            return NotImplemented
        return self.models == other.models and sorted(self.pairs) == sorted(other.pairs)

    def sorted(self) -> "TrialSet":
        return TrialSet(dict(sorted(self.models.items())), sorted(self.pairs))

    def model_genders(self) -> dict[str, str]:
        return {mid: m.gender for mid, m in self.models.items()}


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if line.strip():
                yield lineno, line


def _check_label(token, path, lineno):
    if token not in LABELS:
        raise FormatError(f"unknown label {token!r}", path, lineno)
    return token


def read_trials(path, enrollment=None) -> TrialSet:
    """Read ``<model> <utt> <target|nontarget>`` lines, plus an optional enrollment file."""
    pairs = []
    seen = set()
    for lineno, line in _read_lines(path):
        parts = line.split()
        if len(parts) != 3:
            raise FormatError("expected '<model-id> <utt-id> <label>'", path, lineno)
        model, utt, label = parts
        _check_label(label, path, lineno)
        if (model, utt) in seen:
            raise FormatError(f"duplicate pair ({model}, {utt})", path, lineno)
        seen.add((model, utt))
        pairs.append(Trial(model, utt, label))
    models = read_enrollment(enrollment) if enrollment is not None else {}
    return TrialSet(models, pairs)


def write_trials(trials: TrialSet, path, enrollment=None) -> None:
    lines = sorted(f"{t.model} {t.utt} {t.label}\n" for t in trials.pairs)
    if len({(t.model, t.utt) for t in trials.pairs}) != len(trials.pairs):
        raise VPKitError("duplicate (model, utt) pair")
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")
    if enrollment is not None:
        write_enrollment(trials.models, enrollment)


def read_enrollment(path) -> dict[str, SpeakerModel]:
    """Read ``<model> <speaker> <gender> <utt>`` lines, one per enrollment utterance."""
    rows: dict[str, tuple[str, str, list[str]]] = {}
    for lineno, line in _read_lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise FormatError("expected '<model-id> <speaker> <gender> <utt-id>'", path, lineno)
        model, speaker, gender, utt = parts
        if gender not in GENDERS:
            raise FormatError(f"unknown gender {gender!r}", path, lineno)
        entry = rows.setdefault(model, (speaker, gender, []))
        if entry[:2] != (speaker, gender):
            raise FormatError(f"inconsistent speaker/gender for model {model}", path, lineno)
        entry[2].append(utt)
    return {m: SpeakerModel(s, g, tuple(sorted(u))) for m, (s, g, u) in sorted(rows.items())}


def write_enrollment(models: Mapping[str, SpeakerModel], path) -> None:
    lines = sorted(
        f"{mid} {m.speaker} {m.gender} {utt}\n" for mid, m in models.items() for utt in m.enrollment
    )
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


# ------------------------------------------------------------------- scores


@dataclass(frozen=True, order=True)
class ScoredTrial:
    model: str
    utt: str
    score: float
    label: str


def read_scores(path) -> list[ScoredTrial]:
    out = []
    seen = set()
    for lineno, line in _read_lines(path):
        parts = line.split()
        if len(parts) == 3:
            raise FormatError("missing label", path, lineno)
        if len(parts) != 4:
            raise FormatError("expected '<model-id> <utt-id> <score> <label>'", path, lineno)
        model, utt, raw, label = parts
        try:
            value = float(raw)
        except ValueError:
            raise FormatError(f"non-numeric score {raw!r}", path, lineno) from None
        if not np.isfinite(value):
            raise FormatError(f"non-finite score {raw!r}", path, lineno)
        _check_label(label, path, lineno)
        if (model, utt) in seen:
            raise FormatError(f"duplicate pair ({model}, {utt})", path, lineno)
        seen.add((model, utt))
        out.append(ScoredTrial(model, utt, value, label))
    return out


def write_scores(scores: Iterable[ScoredTrial], path) -> None:
    lines = sorted(f"{s.model} {s.utt} {s.score:.9g} {s.label}\n" for s in scores)
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


# -------------------------------------------------------------- transcripts


@dataclass(frozen=True)
class TranscriptEntry:
    language: str
    text: str
    phones: str | None = None


@dataclass
class TranscriptSet:
    entries: dict[str, TranscriptEntry]
    source: str = "gold"

    def __post_init__(self):
        if self.source not in ("gold", "asr"):
            raise VPKitError(f"transcript source must be gold or asr, got {self.source!r}")

    @classmethod
    def from_manifest(cls, manifest: Manifest) -> "TranscriptSet":
        return cls(
            {r.utt: TranscriptEntry(r.language, r.text, r.phones) for r in manifest.records},
            "gold",
        )


def read_transcripts(path, source: str = "asr") -> TranscriptSet:
    entries = {}
    for lineno, line in _read_lines(path):
        parts = line.split("\t")
        if len(parts) == 3:
            parts.append("")
        if len(parts) != 4:
            raise FormatError("expected 'utt<TAB>language<TAB>text<TAB>phones'", path, lineno)
        utt, language, text, phones = parts
        if not utt:
            raise FormatError("empty utterance id", path, lineno)
        if utt in entries:
            raise FormatError(f"duplicate utterance {utt!r}", path, lineno)
        try:
            check_language(language)
        except VPKitError as exc:
            raise FormatError(str(exc), path, lineno) from None
        entries[utt] = TranscriptEntry(language, text, phones or None)
    return TranscriptSet(entries, source)


def write_transcripts(transcripts: TranscriptSet, path) -> None:
    lines = []
    for utt in sorted(transcripts.entries):
        e = transcripts.entries[utt]
        for value in (e.text, e.phones or ""):
            if "\t" in value or "\n" in value:
                raise VPKitError(f"tab or newline in transcript of {utt!r}")
        lines.append(f"{utt}\t{e.language}\t{e.text}\t{e.phones or ''}\n")
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


# ------------------------------------------------------------ audio lists


def write_audio_list(manifest: Manifest, path, root=None) -> None:
    """``utt<TAB>language<TAB>audio-path`` rows handed to external adapters."""
    lines = []
    for rec in sorted(manifest.records, key=lambda r: r.utt):
        audio = rec.audio or ""
        if root is not None and audio:
            audio = str(Path(root) / audio)
        lines.append(f"{rec.utt}\t{rec.language}\t{audio}\n")
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


def read_audio_list(path) -> dict[str, tuple[str, str]]:
    out = {}
    for lineno, line in _read_lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError("expected 'utt<TAB>language<TAB>path'", path, lineno)
        if parts[0] in out:
            raise FormatError(f"duplicate utterance {parts[0]!r}", path, lineno)
        out[parts[0]] = (parts[1], parts[2])
    return out
