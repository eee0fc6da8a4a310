"""Plan and run the ablation conditions through file-drop adapters.

Neural components (recognizers, speaker encoders, synthesis, phonemizer) are
external commands. Each receives input file paths through a command template
and must write its declared output file. Steps are cached by a content hash of
their inputs, so reruns skip work whose inputs did not change.
"""
from __future__ import annotations

import hashlib
import json
import logging
import string
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from . import ingest, prosody
from .anonymize import (
    SESSION_SCOPE,
    AnonymizationPolicy,
    ArtificialPool,
    apply_assignment,
    assign_targets,
    write_assignment,
)
from .core import VPKitError
from .ingest import EmbeddingTable, Manifest, TranscriptSet, TrialSet
from .metrics import compute_per, compute_wer, privacy_report, score_trials

log = logging.getLogger(__name__)

ROLES = ("asr", "speaker_encoder", "synthesis", "phonemizer")
FORMATS = ("audio_list", "transcripts", "embeddings", "prosody", "scores")
CONDITION_ORDER = ("original", "anon", "resys", "gold_resys", "gold_anon")
STAGES = ("content", "speaker", "anonymize", "synthesize", "evaluate_inputs")


class PlanningError(VPKitError):
    """A condition cannot run with the registered adapters and inputs."""


class AdapterError(VPKitError):
    """An external adapter failed, timed out or wrote a malformed output."""


@dataclass(frozen=True)
class Condition:
    name: str
    transcript_source: str
    embedding_source: str
    synthesis: bool


CONDITIONS = {
    "original": Condition("original", "gold", "original", False),
    "anon": Condition("anon", "asr", "anonymized", True),
    "resys": Condition("resys", "asr", "original", True),
    "gold_resys": Condition("gold_resys", "gold", "original", True),
    "gold_anon": Condition("gold_anon", "gold", "anonymized", True),
}

ALIASES = {
    "anonymization": "anon",
    "resynthesis": "resys",
    "gold-resys": "gold_resys",
    "gold-resynthesis": "gold_resys",
    "gold-anon": "gold_anon",
    "gold-anonymization": "gold_anon",
}


def plan_condition(name: str) -> Condition:
    key = ALIASES.get(name, name)
    if key not in CONDITIONS:
        raise PlanningError(f"unknown condition {name!r}; expected one of {CONDITION_ORDER}")
    return CONDITIONS[key]


# ----------------------------------------------------------------- adapters


@dataclass(frozen=True)
class AdapterSpec:
    role: str
    command: tuple[str, ...]
    inputs: tuple[str, ...] = ("audio",)
    output_format: str = "transcripts"
    timeout_s: float = 3600.0

    def __post_init__(self):
        if self.role not in ROLES:
            raise VPKitError(f"unknown adapter role {self.role!r}")
        if self.output_format not in FORMATS:
            raise VPKitError(f"unknown output format {self.output_format!r}")
        if not self.command:
            raise VPKitError("adapter command is empty")

    @classmethod
    def from_json(cls, role: str, obj: Mapping) -> "AdapterSpec":
        default_out = {
            "asr": "transcripts",
            "speaker_encoder": "embeddings",
            "synthesis": "audio_list",
            "phonemizer": "transcripts",
        }[role]
        default_in = {
            "asr": ("audio",),
            "speaker_encoder": ("audio",),
            "synthesis": ("audio", "transcripts", "embeddings"),
            "phonemizer": ("transcripts",),
        }[role]
        return cls(
            role=role,
            command=tuple(obj["command"]),
            inputs=tuple(obj.get("inputs", default_in)),
            output_format=obj.get("output_format", default_out),
            timeout_s=float(obj.get("timeout_s", 3600.0)),
        )

    def placeholders(self) -> set[str]:
        names = set()
        for part in self.command:
            for _, fname, _, _ in string.Formatter().parse(part):
                if fname:
                    names.add(fname)
        return names


def _validate_output(fmt: str, path: Path):
    readers: dict[str, Callable] = {
        "audio_list": ingest.read_audio_list,
        "transcripts": ingest.read_transcripts,
        "embeddings": ingest.read_embeddings,
        "prosody": prosody.read_prosody,
        "scores": ingest.read_scores,
    }
    return readers[fmt](path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ------------------------------------------------------------------ config


@dataclass
class AttackerSpec:
    name: str
    adapter: AdapterSpec | None = None
    enroll_from: str = "original"

    def __post_init__(self):
        if self.enroll_from not in ("original", "processed"):
            raise VPKitError("attacker enroll_from must be 'original' or 'processed'")


@dataclass
class RunConfig:
    """Everything one ablation invocation needs. Paths are absolute after loading."""

    dataset: str
    language: str
    manifest: Path
    manifest_format: str
    trials: Path
    enrollment: Path
    workdir: Path
    speaker_meta: Path | None = None
    audio_root: Path | None = None
    pool: Path | None = None
    policy: AnonymizationPolicy = field(default_factory=AnonymizationPolicy)
    adapters: dict[str, AdapterSpec] = field(default_factory=dict)
    attackers: dict[str, AttackerSpec] = field(default_factory=dict)
    recognizers: dict[str, AdapterSpec | None] = field(default_factory=dict)
    per_recognizer: str | None = None
    precomputed: dict[str, dict[str, Path]] = field(default_factory=dict)
    conditions: tuple[str, ...] = CONDITION_ORDER
    jobs: int = 1

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls.from_json(obj, base=path.parent)

    @classmethod
    def from_json(cls, obj: Mapping, base=Path(".")) -> "RunConfig":
        base = Path(base)

        def p(value):
            if value is None:
                return None
            value = Path(value)
            return value if value.is_absolute() else (base / value).resolve()

        try:
            man = obj["manifest"]
            adapters = {
                role: AdapterSpec.from_json(role, spec) for role, spec in obj.get("adapters", {}).items()
            }
            attackers = {}
            for name, spec in obj.get("attackers", {}).items():
                spec = dict(spec)
                adapter = AdapterSpec.from_json("speaker_encoder", spec) if "command" in spec else None
                attackers[name] = AttackerSpec(name, adapter, spec.get("enroll_from", "original"))
            recognizers = {
                name: AdapterSpec.from_json("asr", spec) if "command" in spec else None
                for name, spec in obj.get("recognizers", {}).items()
            }
            precomputed = {
                scope: {k: p(v) for k, v in entries.items()}
                for scope, entries in obj.get("precomputed", {}).items()
            }
            return cls(
                dataset=obj["dataset"],
                language=obj["language"],
                manifest=p(man["path"]),
                manifest_format=man["format"],
                speaker_meta=p(man.get("speaker_meta")),
                audio_root=p(man.get("audio_root")),
                trials=p(obj["trials"]),
                enrollment=p(obj["enrollment"]),
                workdir=p(obj.get("workdir", "runs")),
                pool=p(obj.get("pool")),
                policy=AnonymizationPolicy(**obj.get("policy", {})),
                adapters=adapters,
                attackers=attackers,
                recognizers=recognizers,
                per_recognizer=obj.get("per_recognizer"),
                precomputed=precomputed,
                conditions=tuple(obj.get("conditions", CONDITION_ORDER)),
                jobs=int(obj.get("jobs", 1)),
            )
        except KeyError as exc:
            raise VPKitError(f"run config missing field {exc.args[0]!r}") from None
        except TypeError as exc:
            raise VPKitError(f"invalid run config: {exc}") from None

    def pre(self, condition: str, key: str) -> Path | None:
        """Precomputed file for ``key``: condition scope first, then ``shared``."""
        for scope in (condition, "shared"):
            value = self.precomputed.get(scope, {}).get(key)
            if value is not None:
                return value
        return None


# -------------------------------------------------------------------- plan


@dataclass
class StagePlan:
    name: str
    action: str  # "adapter", "local", "precomputed" or "passthrough"
    role: str | None = None


def plan_run(condition: Condition, config: RunConfig) -> list[StagePlan]:
    """Decide how each stage will be produced; fail before anything executes."""
    name = condition.name
    problems = []
    stages: list[StagePlan] = []

    def source(key, adapter, role, stage):
        if config.pre(name, key) is not None:
            stages.append(StagePlan(stage, "precomputed"))
        elif adapter is not None:
            stages.append(StagePlan(stage, "adapter", role))
        else:
            problems.append(f"{stage}: no precomputed '{key}' and no {role} adapter")

    if condition.synthesis:
        if condition.transcript_source == "asr":
            source("asr_transcripts", config.adapters.get("asr"), "asr", "content")
        else:
            stages.append(StagePlan("content", "local"))
        source("original_embeddings", config.adapters.get("speaker_encoder"), "speaker_encoder", "speaker")
        if condition.embedding_source == "anonymized":
            if config.pool is None:
                problems.append("anonymize: no artificial pool configured")
            stages.append(StagePlan("anonymize", "local"))
        else:
            stages.append(StagePlan("anonymize", "passthrough"))
        synth = config.adapters.get("synthesis")
        source("synthesized_audio", synth, "synthesis", "synthesize")
        if synth is not None and config.pre(name, "synthesized_audio") is None:
            if "prosody" in synth.placeholders() and config.pre(name, "prosody") is None:
                problems.append("synthesize: adapter expects {prosody} but none is configured")

    for att in config.attackers.values():
        if config.pre(name, f"attacker:{att.name}") is None and att.adapter is None:
            problems.append(f"evaluate_inputs: attacker {att.name} has no embeddings and no adapter")
        if att.enroll_from == "original" and condition.synthesis:
            if config.pre(name, f"attacker:{att.name}:original") is None and att.adapter is None:
                problems.append(
                    f"evaluate_inputs: attacker {att.name} lacks original-speech embeddings"
                )
    for rec, adapter in config.recognizers.items():
        if config.pre(name, f"recognizer:{rec}") is None and adapter is None:
            problems.append(f"evaluate_inputs: recognizer {rec} has no hypotheses and no adapter")
    stages.append(StagePlan("evaluate_inputs", "mixed"))

    if problems:
        raise PlanningError(f"condition {name}: " + "; ".join(problems))
    return stages


# --------------------------------------------------------------------- run


@dataclass
class RunArtifacts:
    condition: Condition
    workdir: Path
    files: dict[str, Path]
    manifest: dict
    adapter_calls: list[str] = field(default_factory=list)


class _Runner:
    def __init__(self, condition: Condition, config: RunConfig, manifest: Manifest):
        self.cond = condition
        self.config = config
        self.data = manifest
        self.root = config.workdir / condition.name
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "logs").mkdir(exist_ok=True)
        (self.root / ".cache").mkdir(exist_ok=True)
        self.files: dict[str, Path] = {}
        self.stages: list[dict] = []
        self.calls: list[str] = []

    def rel(self, path: Path) -> str:
        try:
            return str(Path(path).resolve().relative_to(self.config.workdir.resolve()))
        except ValueError:
            return str(path)

    # cache -----------------------------------------------------------------

    def _cached(self, tag: str, key: str, outputs: list[Path]) -> bool:
        record = self.root / ".cache" / f"{tag}.json"
        if not record.exists() or not all(o.exists() for o in outputs):
            return False
        saved = json.loads(record.read_text())
        return saved.get("key") == key and saved.get("outputs") == [sha256_file(o) for o in outputs]

    def _remember(self, tag: str, key: str, outputs: list[Path]):
        record = self.root / ".cache" / f"{tag}.json"
        record.write_text(json.dumps({"key": key, "outputs": [sha256_file(o) for o in outputs]}))

    def step(self, tag: str, inputs: Mapping[str, Path], outputs: list[Path], params, produce):
        key = _sha256_text(
            json.dumps(
                {
                    "tag": tag,
                    "inputs": {k: sha256_file(v) for k, v in sorted(inputs.items())},
                    "params": params,
                },
                sort_keys=True,
                default=str,
            )
        )
        if self._cached(tag, key, outputs):
            log.info("%s/%s: cached", self.cond.name, tag)
            return
        produce()
        for out in outputs:
            if not out.exists():
                raise AdapterError(f"{tag}: expected output {out} was not produced")
        self._remember(tag, key, outputs)

    # adapters --------------------------------------------------------------

    def call(self, tag: str, adapter: AdapterSpec, inputs: Mapping[str, Path], out: Path) -> Path:
        needed = adapter.placeholders() - {"out", "workdir"}
        missing = sorted(needed - set(inputs))
        if missing:
            raise PlanningError(f"{tag}: adapter template needs inputs {missing}")
        values = {k: str(v) for k, v in inputs.items()}
        values.update(out=str(out), workdir=str(self.root))

        def produce():
            cmd = [part.format(**values) for part in adapter.command]
            log_path = self.root / "logs" / f"{tag.replace(':', '_')}.log"
            self.calls.append(tag)
            try:
                proc = subprocess.run(cmd, capture_output=True, text=True, timeout=adapter.timeout_s)
            except subprocess.TimeoutExpired:
                raise AdapterError(f"{tag}: adapter timed out after {adapter.timeout_s}s") from None
            except OSError as exc:
                raise AdapterError(f"{tag}: cannot start adapter: {exc}") from None
            log_path.write_text(
                f"$ {' '.join(cmd)}\n--- stdout\n{proc.stdout}\n--- stderr\n{proc.stderr}",
                encoding="utf-8",
            )
            if proc.returncode != 0:
                raise AdapterError(f"{tag}: adapter exited with {proc.returncode}; see {log_path}")
            if not out.exists():
                raise AdapterError(f"{tag}: adapter did not write {out}; see {log_path}")
            try:
                _validate_output(adapter.output_format, out)
            except VPKitError as exc:
                raise AdapterError(f"{tag}: output-format violation: {exc}") from None

        params = {"command": list(adapter.command), "format": adapter.output_format}
        self.step(tag, {k: Path(v) for k, v in inputs.items()}, [out], params, produce)
        return out

    def obtain(self, tag: str, key: str, adapter, inputs, out: Path) -> tuple[Path, str]:
        pre = self.config.pre(self.cond.name, key)
        if pre is not None:
            if not pre.exists():
                raise VPKitError(f"precomputed {key} not found: {pre}")
            return pre, "precomputed"
        return self.call(tag, adapter, inputs, out), "adapter"

    def record(self, stage: str, action: str, inputs: Mapping[str, Path], outputs: Mapping[str, Path],
               role: str | None = None):
        self.stages.append(
            {
                "stage": stage,
                "action": action,
                "adapter": role,
                "inputs": {k: sha256_file(v) for k, v in sorted(inputs.items())},
                "outputs": {
                    k: {"path": self.rel(v), "sha256": sha256_file(v)} for k, v in sorted(outputs.items())
                },
            }
        )
        self.files.update(outputs)

    # stages ----------------------------------------------------------------

    def run(self) -> RunArtifacts:
        cfg = self.config
        audio_in = self.root / "input_audio.tsv"
        ingest.write_audio_list(self.data, audio_in, cfg.audio_root)
        gold = self.root / "gold_transcripts.tsv"
        ingest.write_transcripts(TranscriptSet.from_manifest(self.data), gold)
        utt2spk = self.root / "utt2spk.tsv"
        utt2spk.write_text(
            "".join(f"{u}\t{s}\n" for u, s in sorted(self.data.utt2spk().items())), encoding="utf-8"
        )
        self.files.update(input_audio=audio_in, gold_transcripts=gold, utt2spk=utt2spk)

        processed_audio = audio_in
        if self.cond.synthesis:
            processed_audio = self._synthesis_stages(audio_in, gold)
        self._evaluate_inputs(audio_in, processed_audio)

        manifest = {
            "condition": self.cond.name,
            "wiring": asdict(self.cond),
            "dataset": cfg.dataset,
            "language": cfg.language,
            "stages": self.stages,
        }
        text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        (self.root / "artifacts.json").write_text(text, encoding="utf-8")
        return RunArtifacts(self.cond, self.root, dict(self.files), manifest, list(self.calls))

    def _synthesis_stages(self, audio_in: Path, gold: Path) -> Path:
        cfg = self.config
        if self.cond.transcript_source == "asr":
            path, action = self.obtain(
                "content:asr", "asr_transcripts", cfg.adapters.get("asr"), {"audio": audio_in},
                self.root / "asr_transcripts.tsv",
            )
            self.record("content", action, {"audio": audio_in}, {"transcripts": path},
                        "asr" if action == "adapter" else None)
        else:
            path = gold
            self.record("content", "local", {"gold": gold}, {"transcripts": path})
        transcripts = path

        orig_emb, action = self.obtain(
            "speaker:encoder", "original_embeddings", cfg.adapters.get("speaker_encoder"),
            {"audio": audio_in}, self.root / "original_embeddings.vpeb",
        )
        self.record("speaker", action, {"audio": audio_in}, {"embeddings": orig_emb},
                    "speaker_encoder" if action == "adapter" else None)

        if self.cond.embedding_source == "anonymized":
            anon = self.root / "anonymized_embeddings.vpeb"
            amap = self.root / "assignment.tsv"

            def produce():
                table = ingest.read_embeddings(orig_emb)
                pool = ArtificialPool(ingest.read_embeddings(cfg.pool), str(cfg.pool))
                utt2spk = self.data.utt2spk()
                table = EmbeddingTable(table.dim, {k: table[k] for k in table.keys() if k in utt2spk})
                assignment = assign_targets(table, utt2spk, cfg.policy, pool)
                ingest.write_embeddings(apply_assignment(table, assignment, pool), anon)
                write_assignment(assignment, amap)

            inputs = {"embeddings": orig_emb, "pool": cfg.pool, "utt2spk": self.files["utt2spk"]}
            self.step("anonymize", inputs, [anon, amap], asdict(cfg.policy), produce)
            self.record("anonymize", "local", inputs, {"embeddings": anon, "assignment": amap})
            self.stages[-1].update(level=cfg.policy.level, session=SESSION_SCOPE)
            synth_emb = anon
        else:
            self.record("anonymize", "passthrough", {"embeddings": orig_emb}, {"embeddings": orig_emb})
            synth_emb = orig_emb

        synth_inputs = {"audio": audio_in, "transcripts": transcripts, "embeddings": synth_emb}
        pros = cfg.pre(self.cond.name, "prosody")
        if pros is not None:
            normed = self.root / "prosody_normalized.tsv"
            stats = self.root / "prosody_stats.tsv"

            def produce_prosody():
                seqs = prosody.read_prosody(pros)
                norm = {u: prosody.normalize(s) for u, s in seqs.items()}
                prosody.write_prosody(norm, normed)
                prosody.write_stats(norm, stats)

            self.step("prosody", {"prosody": pros}, [normed, stats], {}, produce_prosody)
            synth_inputs["prosody"] = normed
            synth_inputs["prosody_stats"] = stats

        out, action = self.obtain(
            "synthesize", "synthesized_audio", cfg.adapters.get("synthesis"), synth_inputs,
            self.root / "synthesized_audio.tsv",
        )
        self.record("synthesize", action, synth_inputs, {"audio": out},
                    "synthesis" if action == "adapter" else None)
        return out

    def _evaluate_inputs(self, audio_in: Path, processed: Path):
        cfg = self.config
        jobs = []  # (output name, tag, key, adapter, inputs, out path)
        for att in cfg.attackers.values():
            jobs.append((f"attacker:{att.name}", f"attacker:{att.name}", f"attacker:{att.name}",
                         att.adapter, {"audio": processed},
                         self.root / f"attacker_{att.name}.vpeb"))
            if att.enroll_from == "original" and self.cond.synthesis:
                jobs.append((f"attacker:{att.name}:original", f"attacker:{att.name}:original",
                             f"attacker:{att.name}:original", att.adapter, {"audio": audio_in},
                             self.root / f"attacker_{att.name}_original.vpeb"))
        for rec, adapter in cfg.recognizers.items():
            jobs.append((f"recognizer:{rec}", f"recognizer:{rec}", f"recognizer:{rec}", adapter,
                         {"audio": processed}, self.root / f"hyp_{rec}.tsv"))

        def work(job):
            name, tag, key, adapter, inputs, out = job
            return name, inputs, self.obtain(tag, key, adapter, inputs, out)

        with ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as ex:
            results = list(ex.map(work, jobs))

        inputs_all: dict[str, Path] = {"audio": processed}
        outputs: dict[str, Path] = {}
        sources: dict[str, str] = {}
        for name, inputs, (path, action) in results:
            outputs[name] = path
            sources[name] = action
            if inputs["audio"] != processed:
                inputs_all["original_audio"] = audio_in

        phon = cfg.adapters.get("phonemizer")
        per_rec = cfg.per_recognizer or next(iter(cfg.recognizers), None)
        if per_rec is not None:
            refs = ingest.read_transcripts(self.files["gold_transcripts"], "gold")
            ref_has_phones = all(e.phones for e in refs.entries.values())
            hyp_path = outputs[f"recognizer:{per_rec}"]
            hyps = ingest.read_transcripts(hyp_path)
            hyp_has_phones = all(e.phones for e in hyps.entries.values())
            pre_ref = cfg.pre(self.cond.name, "ref_phones")
            pre_hyp = cfg.pre(self.cond.name, f"phones:{per_rec}")
            if ref_has_phones:
                outputs["ref_phones"] = self.files["gold_transcripts"]
            elif pre_ref is not None or phon is not None:
                outputs["ref_phones"], sources["ref_phones"] = self.obtain(
                    "phonemize:ref", "ref_phones", phon, {"transcripts": self.files["gold_transcripts"]},
                    self.root / "ref_phones.tsv")
            if hyp_has_phones:
                outputs["hyp_phones"] = hyp_path
            elif pre_hyp is not None or phon is not None:
                outputs["hyp_phones"], sources["hyp_phones"] = self.obtain(
                    f"phonemize:{per_rec}", f"phones:{per_rec}", phon, {"transcripts": hyp_path},
                    self.root / f"hyp_{per_rec}_phones.tsv")
        self.record("evaluate_inputs", "mixed", inputs_all, outputs)
        self.stages[-1]["sources"] = dict(sorted(sources.items()))


def run_condition(condition: Condition | str, manifest: Manifest, config: RunConfig) -> RunArtifacts:
    if isinstance(condition, str):
        condition = plan_condition(condition)
    plan_run(condition, config)
    return _Runner(condition, config, manifest).run()


# --------------------------------------------------------------- evaluation


@dataclass
class ReportRow:
    dataset: str
    language: str
    condition: str
    eer: dict[str, float | None]
    wer: dict[str, float | None]
    per: float | None
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ReportRow":
        return cls(**json.loads(text))


def _attacker_table(files: Mapping[str, Path], name: str, trials: TrialSet, enroll_from_original: bool):
    trial_table = ingest.read_embeddings(files[f"attacker:{name}"])
    if not enroll_from_original or f"attacker:{name}:original" not in files:
        return trial_table
    enroll_table = ingest.read_embeddings(files[f"attacker:{name}:original"])
    if enroll_table.dim != trial_table.dim:
        raise VPKitError(f"attacker {name}: enrollment and trial embeddings differ in dim")
    enroll_keys = {u for m in trials.models.values() for u in m.enrollment}
    entries = {}
    for key in set(trial_table.keys()) | set(enroll_table.keys()):
        source = enroll_table if key in enroll_keys else trial_table
        if key in source:
            entries[key] = source[key]
    return EmbeddingTable(trial_table.dim, entries)


def evaluate_run(
    artifacts: RunArtifacts,
    trials: TrialSet,
    references: TranscriptSet,
    config: RunConfig,
    jobs: int = 1,
) -> ReportRow:
    files = artifacts.files
    eer: dict[str, float | None] = {}
    wer: dict[str, float | None] = {}
    details: dict = {"eer": {}, "wer": {}}
    missing = []
    genders = trials.model_genders()
    for name, att in config.attackers.items():
        if f"attacker:{name}" not in files:
            missing.append(f"attacker:{name}")
            eer[name] = None
            continue
        table = _attacker_table(files, name, trials, att.enroll_from == "original")
        scored = score_trials(trials, table)
        ingest.write_scores(scored, artifacts.workdir / f"scores_{name}.txt")
        rep = privacy_report(scored, genders)
        eer[name] = rep.eer_avg
        details["eer"][name] = {
            "female": rep.eer_female,
            "male": rep.eer_male,
            "raw": rep.raw_eer,
            "flipped": rep.flipped,
            "counts": rep.counts,
        }
    for rec in config.recognizers:
        key = f"recognizer:{rec}"
        if key not in files:
            missing.append(key)
            wer[rec] = None
            continue
        hyps = ingest.read_transcripts(files[key])
        res = compute_wer(references, _restrict(hyps, references), jobs=jobs)
        wer[rec] = res.rate
        details["wer"][rec] = {"S": res.substitutions, "D": res.deletions, "I": res.insertions,
                               "words": res.ref_tokens}
    per = None
    if "ref_phones" in files and "hyp_phones" in files:
        ref_ph = ingest.read_transcripts(files["ref_phones"], "gold")
        hyp_ph = ingest.read_transcripts(files["hyp_phones"])
        res = compute_per(_restrict(ref_ph, references), _restrict(hyp_ph, references), jobs=jobs)
        per = res.rate
        details["per"] = {"S": res.substitutions, "D": res.deletions, "I": res.insertions,
                          "phones": res.ref_tokens}
    if missing:
        details["missing"] = missing
    return ReportRow(config.dataset, config.language, artifacts.condition.name, eer, wer, per, details)


def _restrict(ts: TranscriptSet, keys: TranscriptSet) -> TranscriptSet:
    """Drop extra utterances an adapter may have emitted; keep missing ones missing."""
    return TranscriptSet({k: v for k, v in ts.entries.items() if k in keys.entries}, ts.source)


def load_manifest(config: RunConfig) -> Manifest:
    return ingest.parse_manifest(config.manifest, config.manifest_format, config.language,
                                 config.speaker_meta)


def run_ablation(config: RunConfig, conditions=None) -> list[ReportRow]:
    """Plan every requested condition, then run and evaluate each in order."""
    names = [plan_condition(c).name for c in (conditions or config.conditions)]
    manifest = load_manifest(config)
    if manifest.dataset != config.dataset:
        raise VPKitError(f"manifest dataset {manifest.dataset} != config dataset {config.dataset}")
    trials = ingest.read_trials(config.trials, config.enrollment)
    refs = TranscriptSet.from_manifest(manifest)
    plans = {n: plan_run(CONDITIONS[n], config) for n in names}
    rows = []
    for name in names:
        log.info("running %s (%s)", name, [s.action for s in plans[name]])
        art = _Runner(CONDITIONS[name], config, manifest).run()
        row = evaluate_run(art, trials, refs, config, jobs=config.jobs)
        (art.workdir / "report_row.json").write_text(row.to_json(), encoding="utf-8")
        rows.append(row)
    return rows
