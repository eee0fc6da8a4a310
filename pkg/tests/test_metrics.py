import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cosine_mp, eer_bruteforce, levenshtein
from vpkit import metrics
from vpkit.core import VPKitError
from vpkit.ingest import (
    EmbeddingTable,
    ScoredTrial,
    SpeakerModel,
    TranscriptEntry,
    TranscriptSet,
    Trial,
    TrialSet,
)
from vpkit.metrics import (
    compute_eer,
    compute_per,
    compute_wer,
    corpus_error_rate,
    edit_distance,
    flip_rule,
    gender_average,
    normalize_text,
    privacy_report,
    score_trials,
)

# --- EER


def test_separable_is_zero():
    assert compute_eer([0.9, 0.8, 0.7], [0.1, 0.2, 0.3]).eer == 0.0


def test_interleaved_half():
    assert compute_eer([0.6, 0.8], [0.2, 0.4]).eer == 0.0
    assert compute_eer([0.2, 0.6], [0.4, 0.8]).eer == pytest.approx(0.5)


def test_reversed_is_one():
    assert compute_eer([0.1, 0.2], [0.8, 0.9]).eer == 1.0


def test_eer_needs_both_classes():
    with pytest.raises(VPKitError):
        compute_eer([], [0.1])
    with pytest.raises(VPKitError):
        compute_eer([0.1], [float("nan")])


score_lists = st.lists(st.floats(-1, 1).map(lambda x: round(x, 2)), min_size=1, max_size=40)


@given(score_lists, score_lists)
def test_eer_matches_bruteforce(tgt, non):
    assert abs(compute_eer(tgt, non).eer - eer_bruteforce(tgt, non)) <= 1e-9


@given(score_lists, score_lists)
def test_eer_invariant_under_monotone_transform(tgt, non):
    base = compute_eer(tgt, non).eer
    warped = compute_eer(np.tanh(3 * np.array(tgt)) + 2, np.tanh(3 * np.array(non)) + 2).eer
    assert abs(base - warped) <= 1e-12


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=40, unique=True), st.data())
def test_sign_reversal_without_ties(scores, data):
    k = data.draw(st.integers(1, len(scores) - 1))
    tgt, non = scores[:k], scores[k:]
    raw = compute_eer(tgt, non).eer
    neg = compute_eer([-s for s in tgt], [-s for s in non]).eer
    assert abs(neg - (1 - raw)) <= 1e-12
    assert abs(flip_rule(neg)[0] - flip_rule(raw)[0]) <= 1e-12


def test_permuted_labels_near_half():
    rng = np.random.default_rng(0)
    scores = rng.normal(size=20000)
    labels = rng.permutation(np.repeat([True, False], 10000))
    eer = compute_eer(scores[labels], scores[~labels]).eer
    assert abs(flip_rule(eer)[0] - 0.5) <= 0.02


@given(st.floats(0, 1))
def test_flip_rule(x):
    reported, flipped = flip_rule(x)
    assert reported == min(x, 1 - x)
    assert flipped == (x > 0.5)


def test_flip_rule_examples():
    assert flip_rule(0.7)[0] == pytest.approx(0.3)
    assert flip_rule(0.5) == (0.5, False)
    with pytest.raises(VPKitError):
        flip_rule(1.2)


def test_gender_average(caplog):
    assert gender_average(0.2, 0.4) == pytest.approx(0.3)
    assert gender_average(None, 0.4) == 0.4
    assert "only one gender" in caplog.text
    with pytest.raises(VPKitError):
        gender_average(None, None)


def test_privacy_report_flips_per_gender():
    scored = [
        ScoredTrial("f1", "a", 0.9, "target"), ScoredTrial("f1", "b", 0.1, "nontarget"),
        ScoredTrial("m1", "c", 0.1, "target"), ScoredTrial("m1", "d", 0.9, "nontarget"),
    ]
    rep = privacy_report(scored, {"f1": "female", "m1": "male"})
    assert rep.raw_eer == {"female": 0.0, "male": 1.0}
    assert rep.flipped == {"female": False, "male": True}
    assert rep.eer_female == 0.0 and rep.eer_male == 0.0 and rep.eer_avg == 0.0
    assert rep.counts == {"target": 2, "nontarget": 2}


def test_privacy_report_unknown_model():
    with pytest.raises(VPKitError, match="no gender"):
        privacy_report([ScoredTrial("x", "a", 0.5, "target")], {})


# --- scoring


def test_cosine_of_mean_enrollment():
    table = EmbeddingTable(2, {"e1": [1.0, 0.0], "e2": [0.0, 1.0], "t": [1.0, 0.0]})
    trials = TrialSet({"m": SpeakerModel("s", "female", ("e1", "e2"))}, [Trial("m", "t", "target")])
    [s] = score_trials(trials, table)
    assert s.score == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def synthetic_trials(rng, n_models=6, n_utts=30, dim=16):
    table = {}
    models = {}
    for m in range(n_models):
        enroll = tuple(f"e{m}_{k}" for k in range(3))
        for k in enroll:
            table[k] = rng.standard_normal(dim).astype(np.float32)
        models[f"m{m}"] = SpeakerModel(f"s{m}", "female" if m % 2 else "male", enroll)
    for u in range(n_utts):
        table[f"t{u}"] = rng.standard_normal(dim).astype(np.float32)
    pairs = [
        Trial(m, f"t{u}", "target" if u % n_models == i else "nontarget")
        for i, m in enumerate(models) for u in range(n_utts)
    ]
    return TrialSet(models, pairs), EmbeddingTable(dim, table)


def test_scores_match_mpmath(rng):
    trials, table = synthetic_trials(rng)
    for s in score_trials(trials, table)[:40]:
        centroid = sum(table[u] for u in trials.models[s.model].enrollment)
        assert abs(s.score - cosine_mp(centroid, table[s.utt])) <= 1e-12


def test_scores_scale_invariant(rng):
    trials, table = synthetic_trials(rng)
    a = score_trials(trials, table)
    b = score_trials(trials, table.scaled(3.0))
    assert [s.score for s in a] == [s.score for s in b]


def test_missing_embedding(rng):
    trials, table = synthetic_trials(rng)
    entries = dict(table.entries)
    entries.pop("t3")
    with pytest.raises(VPKitError, match="missing embeddings"):
        score_trials(trials, EmbeddingTable(table.dim, entries))


# --- edit distance


@pytest.mark.parametrize(
    "ref,hyp,expected",
    [
        ("a b c", "a b c", (0, 0, 0)),
        ("a b c", "a x c", (1, 0, 0)),
        ("a b c", "a c", (0, 1, 0)),
        ("a c", "a b c", (0, 0, 1)),
        ("a b", "", (0, 2, 0)),
        ("", "x y", (0, 0, 2)),
        ("a", "x y", (1, 0, 1)),
    ],
)
def test_edit_examples(ref, hyp, expected):
    assert tuple(edit_distance(ref.split(), hyp.split())) == expected


tokens = st.lists(st.sampled_from("abcde"), max_size=30)


@given(tokens, tokens)
def test_edit_matches_levenshtein(ref, hyp):
    c = edit_distance(ref, hyp)
    assert c.errors == levenshtein(ref, hyp)
    assert c.deletions - c.insertions == len(ref) - len(hyp)
    assert min(c) >= 0


@given(st.lists(st.tuples(tokens, tokens), min_size=1, max_size=30), st.integers(1, 8))
def test_batch_matches_scalar(pairs, chunk):
    assert metrics.edit_distance_batch(pairs, chunk=chunk) == [edit_distance(r, h) for r, h in pairs]


@given(st.text(max_size=40))
def test_normalize_text_drops_exactly_punctuation(text):
    import re
    import unicodedata

    expected = "".join(
        ch for ch in unicodedata.normalize("NFKC", text).lower() if unicodedata.category(ch)[0] != "P"
    )
    assert normalize_text(text) == re.sub(r"\s+", " ", expected).strip()


def test_normalize_text():
    assert normalize_text("  Hello, WORLD!  ") == "hello world"
    assert normalize_text("Ｆｕｌｌ width") == "full width"
    assert normalize_text("«Ça» va\u2013bien?") == "ça vabien"
    assert normalize_text("l'été") == "lété"


def transcripts(texts, source="gold", phones=None):
    return TranscriptSet(
        {k: TranscriptEntry("en", t, (phones or {}).get(k)) for k, t in texts.items()}, source
    )


def test_wer_is_pooled_not_averaged():
    refs = transcripts({"u1": "one two three four five six seven eight nine", "u2": "ten"})
    hyps = transcripts({"u1": "one two three four five six seven eight nine", "u2": "tan"}, "asr")
    res = compute_wer(refs, hyps)
    assert res.rate == pytest.approx(1 / 10)
    assert (res.substitutions, res.ref_tokens) == (1, 10)


def test_wer_normalization_applies():
    refs = transcripts({"u": "Hello, World!"})
    hyps = transcripts({"u": "hello world"}, "asr")
    assert compute_wer(refs, hyps).rate == 0.0
    assert compute_wer(refs, hyps, normalizer=None).rate == 1.0


def test_wer_above_one():
    refs = transcripts({"u": "a b"})
    hyps = transcripts({"u": "x a y b z"}, "asr")
    res = compute_wer(refs, hyps)
    assert res.rate == pytest.approx(1.5)
    assert metrics.percent(res.rate) == "150.00"


def test_wer_key_mismatch():
    with pytest.raises(VPKitError, match="keys differ"):
        compute_wer(transcripts({"a": "x"}), transcripts({"b": "x"}, "asr"))


def test_per_uses_phones():
    refs = transcripts({"u": "x"}, phones={"u": "h a l o"})
    hyps = transcripts({"u": "y"}, "asr", phones={"u": "h a l u"})
    assert compute_per(refs, hyps).rate == pytest.approx(0.25)
    with pytest.raises(VPKitError, match="phones missing"):
        compute_per(refs, transcripts({"u": "y"}, "asr"))


def test_parallel_pooling_matches_serial():
    rng = np.random.default_rng(7)
    vocab = list("abcdefg")
    pairs = {
        f"u{i:05d}": (list(rng.choice(vocab, rng.integers(1, 10))), list(rng.choice(vocab, rng.integers(0, 10))))
        for i in range(1500)
    }
    serial = corpus_error_rate(pairs, jobs=1)
    parallel = corpus_error_rate(pairs, jobs=2)
    assert (serial.errors, serial.ref_tokens, serial.rate) == (parallel.errors, parallel.ref_tokens, parallel.rate)
    assert serial.per_utterance == parallel.per_utterance


def test_empty_references():
    with pytest.raises(VPKitError, match="no tokens"):
        corpus_error_rate({"u": ([], ["a"])})


def test_percent():
    assert metrics.percent(None) == "n/a"
    assert metrics.percent(0.4750) == "47.50"
