"""Synthetic corpora for tests, benchmarks and demo runs.

Speakers get a random centroid; utterance embeddings are the centroid plus
isotropic noise, stored as float32-representable values.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .core import GENDERS
from .ingest import EmbeddingTable, Manifest, UtteranceRecord

VOCAB = (
    "the a house river stone light green small old new speaks walks under over "
    "between morning evening city garden window music bread water letter friend"
).split()


def make_manifest(
    rng: np.random.Generator,
    speakers_per_gender: int | dict[str, int] = 6,
    utts: tuple[int, int] = (6, 20),
    language: str = "de",
    dataset: str = "cv",
) -> Manifest:
    if isinstance(speakers_per_gender, int):
        speakers_per_gender = {g: speakers_per_gender for g in GENDERS}
    records = []
    for gender in GENDERS:
        for s in range(speakers_per_gender.get(gender, 0)):
            spk = f"{gender[0]}{s:03d}"
            for u in range(int(rng.integers(utts[0], utts[1] + 1))):
                words = rng.choice(VOCAB, size=int(rng.integers(3, 12)))
                records.append(
                    UtteranceRecord(
                        utt=f"{spk}_{u:04d}",
                        speaker=spk,
                        gender=gender,
                        language=language,
                        text=" ".join(words),
                        audio=f"clips/{spk}_{u:04d}.wav",
                    )
                )
    return Manifest(dataset, language, records)


def client_id(speaker: str) -> str:
    return hashlib.sha256(speaker.encode()).hexdigest()


def write_cv_tsv(manifest: Manifest, path, hash_ids: bool = True) -> None:
    """Write a CommonVoice-style ``validated.tsv`` for ``manifest``.

    With ``hash_ids=False`` speaker IDs are written verbatim as client IDs.
    """
    lines = ["client_id\tpath\tsentence\tup_votes\tdown_votes\tage\tgender\n"]
    for rec in manifest.records:
        cid = client_id(rec.speaker) if hash_ids else rec.speaker
        lines.append(
            f"{cid}\t{rec.utt}.mp3\t{rec.text}\t2\t0\t\t{rec.gender}\n"
        )
    Path(path).write_text("".join(lines), encoding="utf-8")


def speaker_embeddings(
    rng: np.random.Generator, manifest: Manifest, dim: int = 32, noise: float = 0.6
) -> EmbeddingTable:
    centroids = {}
    entries = {}
    for rec in sorted(manifest.records, key=lambda r: r.utt):
        if rec.speaker not in centroids:
            centroids[rec.speaker] = rng.standard_normal(dim)
        vec = centroids[rec.speaker] + noise * rng.standard_normal(dim)
        entries[rec.utt] = vec.astype(np.float32).astype(np.float64)
    return EmbeddingTable(dim, entries)


def random_table(rng: np.random.Generator, n: int, dim: int, prefix: str = "k") -> EmbeddingTable:
    mat = rng.standard_normal((n, dim)).astype(np.float32).astype(np.float64)
    return EmbeddingTable(dim, {f"{prefix}{i:05d}": mat[i] for i in range(n)})


def phonemize(text: str) -> str:
    """Toy grapheme 'phones': one token per non-space character."""
    return " ".join(ch for ch in text if not ch.isspace())


def corrupt(rng: np.random.Generator, words: list[str], rate: float) -> list[str]:
    """Apply random substitutions, deletions and insertions at roughly ``rate``."""
    out = []
    for w in words:
        u = rng.random()
        if u < rate / 3:
            out.append(str(rng.choice(VOCAB)))
        elif u < 2 * rate / 3:
            continue
        elif u < rate:
            out.extend([w, str(rng.choice(VOCAB))])
        else:
            out.append(w)
    return out


# per-condition degradation of the fixture outputs: (attacker noise, recognizer error rate)
FIXTURE_DEGRADATION = {
    "input_audio": (0.1, 0.05),
    "resys": (0.5, 0.15),
    "gold_resys": (0.5, 0.1),
    "anon": (3.0, 0.2),
    "gold_anon": (3.0, 0.12),
}


def build_fixture_project(root, stub_command: list[str], seed: int = 0,
                          speakers_per_gender: int = 12, dim: int = 16) -> Path:
    """Write a small self-contained ablation project and return its run config path.

    Every external model is replaced by ``stub_command`` (see scripts/stub_adapter.py)
    copying pre-generated files from ``root/fixtures``.
    """
    from . import ingest
    from .orchestrate import CONDITION_ORDER, CONDITIONS
    from .trialgen import TrialGenConfig, generate_trials

    root = Path(root)
    fix = root / "fixtures"
    (fix / "shared").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    write_cv_tsv(make_manifest(rng, speakers_per_gender, (8, 16)), root / "validated.tsv", hash_ids=False)
    man = ingest.parse_manifest(root / "validated.tsv", "cv_tsv", "de")
    trials, _ = generate_trials(man, TrialGenConfig.for_dataset("cv", seed=seed))
    ingest.write_trials(trials, root / "trials.txt", root / "trials.enroll.txt")
    ingest.write_embeddings(random_table(rng, 40, dim, "pool"), root / "pool.vpeb")

    clean = speaker_embeddings(rng, man, dim)
    ingest.write_embeddings(clean, fix / "shared" / "original.vpeb")
    gold = ingest.TranscriptSet.from_manifest(man)
    ingest.write_transcripts(
        ingest.TranscriptSet({u: ingest.TranscriptEntry(e.language, e.text, phonemize(e.text))
                              for u, e in gold.entries.items()}, "gold"),
        fix / "shared" / "ref_phones.tsv",
    )

    def hypotheses(rate, with_phones):
        entries = {}
        for u, e in sorted(gold.entries.items()):
            text = " ".join(corrupt(rng, e.text.split(), rate))
            entries[u] = ingest.TranscriptEntry(e.language, text, phonemize(text) if with_phones else None)
        return ingest.TranscriptSet(entries, "asr")

    ingest.write_transcripts(hypotheses(0.1, False), fix / "shared" / "asr.tsv")

    for cond in CONDITION_ORDER:
        views = ["input_audio"] + (["synthesized_audio"] if CONDITIONS[cond].synthesis else [])
        for view in views:
            noise, rate = FIXTURE_DEGRADATION["input_audio" if view == "input_audio" else cond]
            d = fix / cond / view
            d.mkdir(parents=True, exist_ok=True)
            for att in ("A", "B"):
                ingest.write_embeddings(
                    EmbeddingTable(dim, {k: (clean[k] + noise * rng.standard_normal(dim))
                                         .astype(np.float32).astype(np.float64) for k in clean.keys()}),
                    d / f"attacker_{att}.vpeb",
                )
            ingest.write_transcripts(hypotheses(rate, True), d / "hyp_R1.tsv")
            ingest.write_transcripts(hypotheses(rate, False), d / "hyp_R2.tsv")

    stub = list(stub_command)

    def per_condition(name):
        return {"command": stub + ["per-condition", str(fix), name, "{workdir}", "{out}", "{audio}"]}

    config = {
        "dataset": "cv",
        "language": "de",
        "manifest": {"path": "validated.tsv", "format": "cv_tsv"},
        "trials": "trials.txt",
        "enrollment": "trials.enroll.txt",
        "workdir": "runs",
        "pool": "pool.vpeb",
        "policy": {"level": "speaker", "d_min": 0.3, "seed": seed},
        "adapters": {
            "asr": {"command": stub + ["copy", str(fix / "shared" / "asr.tsv"), "{out}"]},
            "speaker_encoder": {"command": stub + ["copy", str(fix / "shared" / "original.vpeb"), "{out}"]},
            "synthesis": {"command": stub + ["copy", "{audio}", "{out}"]},
        },
        "attackers": {
            "A": per_condition("attacker_A.vpeb"),
            "B": {**per_condition("attacker_B.vpeb"), "enroll_from": "processed"},
        },
        "recognizers": {"R1": per_condition("hyp_R1.tsv"), "R2": per_condition("hyp_R2.tsv")},
        "per_recognizer": "R1",
        "precomputed": {"shared": {"ref_phones": "fixtures/shared/ref_phones.tsv"}},
    }
    path = root / "config.json"
    path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
