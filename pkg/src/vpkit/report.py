"""Result tables in CSV/markdown and the trial-count summary."""
from __future__ import annotations

import csv
import io
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

from .core import LANGUAGES, VPKitError
from .ingest import read_trials
from .metrics import percent
from .orchestrate import CONDITION_ORDER, ReportRow

DATASET_ORDER = ("libri", "cv")


def _rank(seq, value):
    return (seq.index(value), "") if value in seq else (len(seq), value)


def row_key(row: ReportRow):
    return (
        _rank(DATASET_ORDER, row.dataset),
        _rank(LANGUAGES, row.language),
        _rank(CONDITION_ORDER, row.condition),
    )


def _columns(rows: Sequence[ReportRow], attr: str) -> list[str]:
    seen = []
    for row in rows:
        for name in getattr(row, attr):
            if name not in seen:
                seen.append(name)
    return seen


def table_cells(rows: Iterable[ReportRow]) -> tuple[list[str], list[list[str]]]:
    """Header and body: dataset, lang, condition, EER columns, WER columns, PER."""
    rows = sorted(rows, key=row_key)
    attackers = _columns(rows, "eer")
    recognizers = _columns(rows, "wer")
    header = ["dataset", "lang", "condition"]
    header += [f"EER {a} (%)" for a in attackers]
    header += [f"WER {r} (%)" for r in recognizers]
    header.append("PER (%)")
    body = []
    for row in rows:
        cells = [row.dataset, row.language, row.condition]
        cells += [percent(row.eer.get(a)) for a in attackers]
        cells += [percent(row.wer.get(r)) for r in recognizers]
        cells.append(percent(row.per))
        body.append(cells)
    return header, body


def render(rows: Iterable[ReportRow], fmt: str = "markdown") -> str:
    header, body = table_cells(rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)
        return buf.getvalue()
    if fmt != "markdown":
        raise VPKitError(f"unknown report format {fmt!r}")
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("|" + "|".join(["---"] * 3 + ["---:"] * (len(header) - 3)) + "|")
    lines += ["| " + " | ".join(cells) + " |" for cells in body]
    return "\n".join(lines) + "\n"


def load_rows(runs_dir) -> list[ReportRow]:
    paths = sorted(Path(runs_dir).rglob("report_row.json"))
    if not paths:
        raise VPKitError(f"no report_row.json files under {runs_dir}")
    return [ReportRow.from_json(p.read_text(encoding="utf-8")) for p in paths]


def trial_count_summary(files: Sequence[tuple[str, str, Path]]) -> str:
    """CSV of trial counts in thousands per (dataset, language).

    ``files`` holds (dataset, language, trial-file path) triples; several
    files for the same group are summed.
    """
    if not files:
        raise VPKitError("no trial files given")
    totals: Counter = Counter()
    targets: Counter = Counter()
    for dataset, language, path in files:
        trials = read_trials(path)
        if not trials.pairs:
            raise VPKitError(f"trial file {path} is empty")
        totals[(dataset, language)] += len(trials.pairs)
        targets[(dataset, language)] += sum(p.label == "target" for p in trials.pairs)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "lang", "trials", "trials_k", "targets"])
    for key in sorted(totals, key=lambda k: (_rank(DATASET_ORDER, k[0]), _rank(LANGUAGES, k[1]))):
        writer.writerow([key[0], key[1], totals[key], f"{totals[key] / 1000:.1f}", targets[key]])
    return buf.getvalue()
