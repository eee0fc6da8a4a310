import json
import shutil
import sys

import pytest

from conftest import STUB
from vpkit import ingest
from vpkit.ingest import TranscriptSet
from vpkit.metrics import compute_per, compute_wer, privacy_report, score_trials
from vpkit.orchestrate import (
    CONDITION_ORDER,
    STAGES,
    AdapterError,
    PlanningError,
    ReportRow,
    RunConfig,
    evaluate_run,
    load_manifest,
    plan_condition,
    plan_run,
    run_ablation,
    run_condition,
)
from vpkit.synthetic import build_fixture_project

STUB_CMD = [sys.executable, str(STUB)]

WIRING = {
    "original": ("gold", "original", False),
    "anon": ("asr", "anonymized", True),
    "resys": ("asr", "original", True),
    "gold_resys": ("gold", "original", True),
    "gold_anon": ("gold", "anonymized", True),
}


@pytest.mark.parametrize("name", CONDITION_ORDER)
def test_wiring_table(name):
    c = plan_condition(name)
    assert (c.transcript_source, c.embedding_source, c.synthesis) == WIRING[name]


@pytest.mark.parametrize(
    "alias,name",
    [("resynthesis", "resys"), ("gold-anonymization", "gold_anon"), ("gold-resynthesis", "gold_resys")],
)
def test_condition_aliases(alias, name):
    assert plan_condition(alias) == plan_condition(name)


def test_unknown_condition():
    with pytest.raises(PlanningError):
        plan_condition("noise")


@pytest.fixture(scope="module")
def project(tmp_path_factory):
    root = tmp_path_factory.mktemp("project")
    build_fixture_project(root, STUB_CMD, seed=3, speakers_per_gender=8)
    return root


def config_for(project, tmp_path, **changes):
    obj = json.loads((project / "config.json").read_text())
    obj["workdir"] = str(tmp_path / "runs")
    for key, value in changes.items():
        if value is None:
            obj.pop(key, None)
        else:
            obj[key] = value
    return RunConfig.from_json(obj, base=project), obj


def test_config_paths_resolve_relative_to_file(project):
    cfg = RunConfig.load(project / "config.json")
    assert cfg.manifest == (project / "validated.tsv").resolve()
    assert cfg.pre("anon", "ref_phones") == (project / "fixtures/shared/ref_phones.tsv").resolve()
    assert cfg.attackers["B"].enroll_from == "processed"


def test_config_missing_field(project):
    obj = json.loads((project / "config.json").read_text())
    del obj["trials"]
    with pytest.raises(Exception, match="missing field 'trials'"):
        RunConfig.from_json(obj, base=project)


def test_resys_without_asr_fails_before_running(project, tmp_path):
    cfg, obj = config_for(project, tmp_path)
    cfg.adapters.pop("asr")
    with pytest.raises(PlanningError, match="content"):
        run_condition("resys", load_manifest(cfg), cfg)
    assert not (tmp_path / "runs").exists()
    # gold conditions do not need a recognizer for content
    assert [s.name for s in plan_run(plan_condition("gold_resys"), cfg)] == list(STAGES)


def test_anon_needs_pool(project, tmp_path):
    cfg, _ = config_for(project, tmp_path, pool=None)
    with pytest.raises(PlanningError, match="pool"):
        plan_run(plan_condition("anon"), cfg)


def test_original_with_precomputed_inputs_runs_no_adapters(project, tmp_path):
    fix = project / "fixtures" / "original" / "input_audio"
    cfg, _ = config_for(project, tmp_path)
    cfg.adapters.clear()
    for att in cfg.attackers.values():
        att.adapter = None
    cfg.recognizers = {"R1": None}
    cfg.precomputed["original"] = {
        "attacker:A": fix / "attacker_A.vpeb",
        "attacker:B": fix / "attacker_B.vpeb",
        "recognizer:R1": fix / "hyp_R1.tsv",
    }
    art = run_condition("original", load_manifest(cfg), cfg)
    assert art.adapter_calls == []
    assert [s["stage"] for s in art.manifest["stages"]] == ["evaluate_inputs"]


def test_anon_runs_all_stages_and_reruns_identically(project, tmp_path):
    cfg, _ = config_for(project, tmp_path)
    man = load_manifest(cfg)
    first = run_condition("anon", man, cfg)
    assert [s["stage"] for s in first.manifest["stages"]] == list(STAGES)
    assert "content:asr" in first.adapter_calls and "synthesize" in first.adapter_calls
    text = (first.workdir / "artifacts.json").read_bytes()
    assert (first.workdir / "assignment.tsv").exists()
    anon_stage = first.manifest["stages"][2]
    assert anon_stage["session"] == "one manifest = one session" and anon_stage["level"] == "speaker"

    second = run_condition("anon", man, cfg)
    assert second.adapter_calls == []
    assert (second.workdir / "artifacts.json").read_bytes() == text

    (first.workdir / "synthesized_audio.tsv").unlink()
    third = run_condition("anon", man, cfg)
    assert third.adapter_calls == ["synthesize"]
    assert (third.workdir / "artifacts.json").read_bytes() == text


def test_adapter_failure_is_reported_with_log(project, tmp_path):
    cfg, obj = config_for(project, tmp_path)
    obj["adapters"]["asr"] = {"command": STUB_CMD + ["fail"]}
    cfg = RunConfig.from_json(obj, base=project)
    with pytest.raises(AdapterError, match="exited with 3"):
        run_condition("resys", load_manifest(cfg), cfg)
    log = (tmp_path / "runs" / "resys" / "logs" / "content_asr.log").read_text()
    assert "stub failure requested" in log


def test_adapter_output_format_violation(project, tmp_path):
    bogus = tmp_path / "bogus.vpeb"
    bogus.write_bytes(b"not embeddings")
    cfg, obj = config_for(project, tmp_path)
    obj["adapters"]["speaker_encoder"] = {"command": STUB_CMD + ["copy", str(bogus), "{out}"]}
    cfg = RunConfig.from_json(obj, base=project)
    with pytest.raises(AdapterError, match="output-format violation"):
        run_condition("gold_resys", load_manifest(cfg), cfg)


def test_template_with_unknown_input(project, tmp_path):
    cfg, obj = config_for(project, tmp_path)
    obj["adapters"]["synthesis"] = {"command": STUB_CMD + ["copy", "{voice}", "{out}"]}
    cfg = RunConfig.from_json(obj, base=project)
    with pytest.raises(PlanningError, match="voice"):
        run_condition("gold_resys", load_manifest(cfg), cfg)


def test_evaluate_run_matches_direct_metrics(project, tmp_path):
    cfg, _ = config_for(project, tmp_path)
    man = load_manifest(cfg)
    trials = ingest.read_trials(cfg.trials, cfg.enrollment)
    refs = TranscriptSet.from_manifest(man)
    art = run_condition("resys", man, cfg)
    row = evaluate_run(art, trials, refs, cfg)

    fix = project / "fixtures" / "resys"
    processed_b = ingest.read_embeddings(fix / "synthesized_audio" / "attacker_B.vpeb")
    rep_b = privacy_report(score_trials(trials, processed_b), trials.model_genders())
    assert row.eer["B"] == rep_b.eer_avg

    # attacker A enrolls on original speech and is tested on processed speech
    orig_a = ingest.read_embeddings(fix / "input_audio" / "attacker_A.vpeb")
    proc_a = ingest.read_embeddings(fix / "synthesized_audio" / "attacker_A.vpeb")
    enroll = {u for m in trials.models.values() for u in m.enrollment}
    mixed = ingest.EmbeddingTable(orig_a.dim, {k: (orig_a if k in enroll else proc_a)[k] for k in orig_a.keys()})
    rep_a = privacy_report(score_trials(trials, mixed), trials.model_genders())
    assert row.eer["A"] == rep_a.eer_avg
    assert row.eer["A"] != row.eer["B"]

    hyp1 = ingest.read_transcripts(fix / "synthesized_audio" / "hyp_R1.tsv")
    assert row.wer["R1"] == compute_wer(refs, hyp1).rate
    ref_ph = ingest.read_transcripts(project / "fixtures/shared/ref_phones.tsv", "gold")
    assert row.per == compute_per(ref_ph, hyp1).rate
    assert (art.workdir / "scores_A.txt").exists()


def test_per_is_absent_without_phones(project, tmp_path):
    cfg, _ = config_for(project, tmp_path, per_recognizer="R2", precomputed={})
    man = load_manifest(cfg)
    art = run_condition("original", man, cfg)
    row = evaluate_run(art, ingest.read_trials(cfg.trials, cfg.enrollment), TranscriptSet.from_manifest(man), cfg)
    assert row.per is None
    assert row.wer["R2"] is not None


def test_run_ablation_writes_rows(project, tmp_path):
    cfg, _ = config_for(project, tmp_path)
    rows = run_ablation(cfg, ["original", "gold-anonymization"])
    assert [r.condition for r in rows] == ["original", "gold_anon"]
    for r in rows:
        saved = (tmp_path / "runs" / r.condition / "report_row.json").read_text()
        assert ReportRow.from_json(saved) == r


def test_precomputed_condition_scope_wins(project, tmp_path):
    cfg, _ = config_for(project, tmp_path)
    other = tmp_path / "asr_override.tsv"
    shutil.copyfile(project / "fixtures/shared/asr.tsv", other)
    cfg.precomputed["shared"]["asr_transcripts"] = project / "fixtures/shared/asr.tsv"
    cfg.precomputed["resys"] = {"asr_transcripts": other}
    assert cfg.pre("resys", "asr_transcripts") == other
    assert cfg.pre("anon", "asr_transcripts") == project / "fixtures/shared/asr.tsv"
