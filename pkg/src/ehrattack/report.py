"""Frequency tables over the per-action log.

Only kept actions count. The code credited for an action is the inserted
synonym for additions and the original code for removals and replacements.
Percentages are normalised within each action kind.
"""
from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict

from .errors import ParseError
from .records import ActionKind, Cohort

KINDS = ("add", "remove", "replace")
LOG_KEYS = {"patient", "kind", "visit", "code", "synonym", "dF", "si", "kept"}


def parse_action_log(lines) -> list:
    entries = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise ParseError(f"action log line {lineno}: invalid JSON") from None
        if not isinstance(obj, dict) or set(obj) != LOG_KEYS:
            raise ParseError(f"action log line {lineno}: expected keys {sorted(LOG_KEYS)}")
        if obj["kind"] not in KINDS or not isinstance(obj["visit"], int) \
                or not isinstance(obj["kept"], bool):
            raise ParseError(f"action log line {lineno}: bad kind/visit/kept value")
        if (obj["kind"] == "remove") != (obj["synonym"] is None):
            raise ParseError(f"action log line {lineno}: synonym inconsistent with kind")
        entries.append(obj)
    return entries


def attacked_code(entry: dict) -> str:
    return entry["synonym"] if entry["kind"] == ActionKind.ADD.value else entry["code"]


def _pct(count, total) -> float:
    return 100.0 * count / total if total else 0.0


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def frequency_tables(entries: list, cohort: Cohort) -> dict:
    """Return ``{filename: text}`` for code_freq.csv, visit_freq.csv, heatmap.csv, cases.md."""
    kept = [e for e in entries if e["kept"]]
    n_visits = max([p.record.n_visits for p in cohort] + [e["visit"] for e in kept] + [1])
    codes = sorted(set(cohort.vocabulary()) | {attacked_code(e) for e in kept})
    totals = Counter(e["kind"] for e in kept)
    by_code = Counter((e["kind"], attacked_code(e)) for e in kept)
    by_visit = Counter((e["kind"], e["visit"]) for e in kept)
    by_cell = Counter((e["kind"], attacked_code(e), e["visit"]) for e in kept)

    code_rows = [[c] + [_fmt(_pct(by_code[(k, c)], totals[k])) for k in KINDS] for c in codes]
    visit_rows = [[n] + [_fmt(_pct(by_visit[(k, n)], totals[k])) for k in KINDS]
                  for n in range(1, n_visits + 1)]
    heat_rows = [[k, c] + [_fmt(_pct(by_cell[(k, c, n)], totals[k]))
                           for n in range(1, n_visits + 1)]
                 for k in KINDS for c in codes]
    return {
        "code_freq.csv": _csv(["code", *KINDS], code_rows),
        "visit_freq.csv": _csv(["visit", *KINDS], visit_rows),
        "heatmap.csv": _csv(["kind", "code"] + [f"visit_{n}" for n in range(1, n_visits + 1)],
                            heat_rows),
        "cases.md": case_summaries(kept, cohort, n_visits),
    }


def case_summaries(kept: list, cohort: Cohort, n_visits: int) -> str:
    per_patient = defaultdict(list)
    for e in kept:
        per_patient[e["patient"]].append(e)
    labels = {p.id: p.label for p in cohort}
    out = ["# Attack case summaries", ""]
    if not per_patient:
        out.append("No kept actions.")
        return "\n".join(out) + "\n"
    for pid in sorted(per_patient):
        acts = per_patient[pid]
        label = labels.get(pid)
        status = "unknown" if label is None else ("observed" if label.event else "censored")
        time = "?" if label is None else f"{label.time:.4f}"
        net = sum(e["dF"] for e in acts)
        out.append(f"## {pid}")
        out.append("")
        out.append(f"T = {time} ({status}); kept actions: {len(acts)}; "
                   f"net prediction change: {net:+.4f}; "
                   f"last similarity: {acts[-1]['si']:.4f}")
        out.append("")
        out.append("| visit | # Rem | # Rep | # Add |")
        out.append("|---|---|---|---|")
        counts = Counter((e["visit"], e["kind"]) for e in acts)
        for n in range(1, n_visits + 1):
            out.append(f"| {n} | {counts[(n, 'remove')]} | {counts[(n, 'replace')]} | "
                       f"{counts[(n, 'add')]} |")
        out.append("")
    return "\n".join(out)
