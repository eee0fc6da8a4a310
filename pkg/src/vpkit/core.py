"""Shared domain types, errors, seeded substreams and cosine arithmetic."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

LANGUAGES = ("en", "de", "fr", "it", "es", "pt", "nl", "pl", "ru")
OTHER_LANGUAGE = "other"
GENDERS = ("female", "male")
LABELS = ("target", "nontarget")


class VPKitError(Exception):
    """Base class for domain errors raised by the toolkit."""


class FormatError(VPKitError):
    """Malformed input file. Carries the file position when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
            where += ": "
        super().__init__(where + message)


def check_language(tag: str) -> str:
    if tag not in LANGUAGES and tag != OTHER_LANGUAGE:
        raise VPKitError(f"unsupported language tag {tag!r}")
    return tag


def check_gender(gender: str) -> str:
    if gender not in GENDERS:
        raise VPKitError(f"gender must be one of {GENDERS}, got {gender!r}")
    return gender


def as_vector(values, dim: int | None = None) -> np.ndarray:
    """Validate an embedding and return it as a read-only float64 array.

    Rejects empty, non-finite and zero-norm vectors; a zero vector means the
    upstream extractor failed and is never normalized away silently.
    """
    vec = np.array(values, dtype=np.float64).reshape(-1)
    if vec.size == 0:
        raise VPKitError("embedding must have dim >= 1")
    if dim is not None and vec.size != dim:
        raise VPKitError(f"dimension mismatch: expected {dim}, got {vec.size}")
    if not np.all(np.isfinite(vec)):
        raise VPKitError("embedding contains non-finite values")
    if not np.any(vec):
        raise VPKitError("zero-norm embedding")
    vec.flags.writeable = False
    return vec


def direction(vec: np.ndarray) -> np.ndarray:
    """Unit vector along ``vec``.

    Dividing by the largest magnitude first makes the result bit-identical
    for ``c * vec`` whenever ``c * vec`` is exact (e.g. float32 payloads
    scaled in float64), so assignments and scores do not drift under
    rescaling.
    """
    vec = np.asarray(vec, dtype=np.float64)
    peak = np.max(np.abs(vec), axis=-1, keepdims=True)
    if np.any(peak == 0):
        raise VPKitError("zero-norm embedding")
    scaled = vec / peak
    return scaled / np.linalg.norm(scaled, axis=-1, keepdims=True)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise VPKitError(f"dimension mismatch: {a.size} vs {b.size}")
    if a.size == 0 or not np.any(a) or not np.any(b):
        raise VPKitError("zero-norm embedding")
    return a, b


def cosine_similarity(a, b) -> float:
    a, b = _pair(a, b)
    value = float(np.dot(direction(a), direction(b)))
    return min(1.0, max(-1.0, value))


def cosine_distance(a, b) -> float:
    return 1.0 - cosine_similarity(a, b)


@dataclass(frozen=True)
class Score:
    value: float
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise VPKitError(f"unknown label {self.label!r}")
        if not -1.0 <= self.value <= 1.0:
            raise VPKitError(f"cosine score out of range: {self.value}")


def substream(seed: int, *keys: str) -> np.random.Generator:
    """Counter-based generator keyed by ``seed`` and string labels.

    Each distinct key tuple gets its own Philox stream, so adding a speaker
    or utterance never perturbs the draws made for the others.
    """
    h = hashlib.sha256(str(int(seed)).encode())
    for key in keys:
        h.update(b"\x1f" + str(key).encode("utf-8"))
    key_int = int.from_bytes(h.digest()[:16], "little")
    return np.random.Generator(np.random.Philox(key=key_int))


def unit_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-wise ``direction`` for a 2-D array."""
    return direction(np.atleast_2d(matrix))


def stable_sum(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Sum of embeddings in a fixed order (caller supplies the order)."""
    return np.sum(np.stack([np.asarray(v, dtype=np.float64) for v in vectors]), axis=0)
