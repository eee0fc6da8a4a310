import pytest

from vpkit import report
from vpkit.core import VPKitError
from vpkit.orchestrate import ReportRow


def row(dataset, lang, cond, eer=0.1, per=0.05):
    return ReportRow(dataset, lang, cond, {"ecapa": eer}, {"whisper": 0.2}, per)


def test_rows_sorted_and_formatted():
    rows = [row("cv", "de", "anon", 0.4750, None), row("libri", "en", "resys"), row("cv", "de", "original")]
    text = report.render(rows, "markdown").splitlines()
    assert text[0] == "| dataset | lang | condition | EER ecapa (%) | WER whisper (%) | PER (%) |"
    assert [line.split(" | ")[2] for line in text[2:]] == ["resys", "original", "anon"]
    assert text[-1].endswith("| 47.50 | 20.00 | n/a |")


def test_csv_render():
    csv_text = report.render([row("cv", "ru", "original")], "csv")
    assert csv_text.splitlines() == [
        "dataset,lang,condition,EER ecapa (%),WER whisper (%),PER (%)",
        "cv,ru,original,10.00,20.00,5.00",
    ]


def test_missing_attacker_column_is_na():
    a = ReportRow("cv", "de", "anon", {"x": 0.1}, {}, None)
    b = ReportRow("cv", "de", "resys", {"y": 0.2}, {}, None)
    _, body = report.table_cells([a, b])
    assert body[0][3:5] == ["10.00", "n/a"]
    assert body[1][3:5] == ["n/a", "20.00"]


def test_unknown_format():
    with pytest.raises(VPKitError):
        report.render([row("cv", "de", "anon")], "html")


def test_load_rows(tmp_path):
    for cond in ("anon", "original"):
        (tmp_path / cond).mkdir()
        (tmp_path / cond / "report_row.json").write_text(row("cv", "de", cond).to_json())
    assert {r.condition for r in report.load_rows(tmp_path)} == {"anon", "original"}
    with pytest.raises(VPKitError):
        report.load_rows(tmp_path / "anon" / "nothing")


def test_trial_counts(tmp_path):
    a = tmp_path / "a.txt"
    a.write_text("m1 u1 target\nm1 u2 nontarget\nm2 u1 nontarget\n")
    b = tmp_path / "b.txt"
    b.write_text("m9 u9 target\n")
    out = report.trial_count_summary([("cv", "de", a), ("cv", "de", b), ("libri", "en", b)])
    assert out.splitlines() == [
        "dataset,lang,trials,trials_k,targets",
        "libri,en,1,0.0,1",
        "cv,de,4,0.0,2",
    ]


def test_trial_counts_empty(tmp_path):
    empty = tmp_path / "e.txt"
    empty.write_text("")
    with pytest.raises(VPKitError):
        report.trial_count_summary([("cv", "de", empty)])
    with pytest.raises(VPKitError):
        report.trial_count_summary([])
