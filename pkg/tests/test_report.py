import csv
import io
import json

import pytest
from hypothesis import given, strategies as st

from ehrattack.errors import ParseError
from ehrattack.records import Cohort, SurvivalLabel, Patient
from ehrattack.report import KINDS, frequency_tables, parse_action_log

from conftest import rec

COHORT = Cohort((Patient(rec("p1", ["X", "Y"], ["X2"], ["Z"]), SurvivalLabel(2.0, 1)),
                 Patient(rec("p2", ["Y"], ["Z"]), SurvivalLabel(5.0, 0))))


def entry(kind="remove", visit=2, code="X2", synonym=None, kept=True, patient="p1"):
    return {"patient": patient, "kind": kind, "visit": visit, "code": code,
            "synonym": synonym, "dF": 0.5, "si": 0.95, "kept": kept}


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_empty_log_gives_all_zero_tables():
    tables = frequency_tables(parse_action_log([]), COHORT)
    for name in ("code_freq.csv", "visit_freq.csv", "heatmap.csv"):
        for row in rows(tables[name]):
            assert all(row[k] == "0.0000" for k in row if k not in ("code", "visit", "kind"))
    assert "No kept actions" in tables["cases.md"]


def test_single_remove_at_visit_two():
    tables = frequency_tables([entry()], COHORT)
    by_visit = {r["visit"]: r for r in rows(tables["visit_freq.csv"])}
    assert by_visit["2"]["remove"] == "100.0000"
    assert all(by_visit[v]["remove"] == "0.0000" for v in ("1", "3"))
    codes = {r["code"]: r for r in rows(tables["code_freq.csv"])}
    assert codes["X2"]["remove"] == "100.0000" and codes["X2"]["add"] == "0.0000"
    heat = {(r["kind"], r["code"]): r for r in rows(tables["heatmap.csv"])}
    assert heat[("remove", "X2")]["visit_2"] == "100.0000"


def test_reversed_actions_are_not_counted():
    tables = frequency_tables([entry(kept=False)], COHORT)
    assert all(r["remove"] == "0.0000" for r in rows(tables["visit_freq.csv"]))


def test_add_is_credited_to_the_inserted_code():
    tables = frequency_tables([entry(kind="add", code="X", synonym="W", visit=1)], COHORT)
    codes = {r["code"]: r for r in rows(tables["code_freq.csv"])}
    assert codes["W"]["add"] == "100.0000" and codes["X"]["add"] == "0.0000"


def test_csv_format():
    text = frequency_tables([entry()], COHORT)["visit_freq.csv"]
    assert text.startswith("visit,add,remove,replace\n")
    assert "\r" not in text


def test_case_summary_counts():
    log = [entry(), entry(kind="replace", visit=1, code="X", synonym="W"),
           entry(kind="add", visit=1, code="Y", synonym="V")]
    md = frequency_tables(log, COHORT)["cases.md"]
    assert "## p1" in md and "| 1 | 0 | 1 | 1 |" in md and "| 2 | 1 | 0 | 0 |" in md
    assert "observed" in md


@pytest.mark.parametrize("line", [
    "{",
    json.dumps({"patient": "p"}),
    json.dumps({**entry(), "kind": "swap"}),
    json.dumps({**entry(), "kept": "yes"}),
    json.dumps(entry(kind="add")),
])
def test_malformed_log_line(line):
    with pytest.raises(ParseError):
        parse_action_log([line])


def test_blank_lines_are_skipped():
    assert parse_action_log(["", json.dumps(entry()), "  "]) == [entry()]


log_entries = st.lists(st.builds(
    lambda kind, visit, code, kept: entry(kind=kind, visit=visit, code=code, kept=kept,
                                          synonym=None if kind == "remove" else code + "s"),
    st.sampled_from(KINDS), st.integers(1, 4), st.sampled_from(["X", "Y", "Z", "X2"]),
    st.booleans()), max_size=40)


@given(log_entries)
def test_every_table_sums_to_100_per_kind(log):
    tables = frequency_tables(log, COHORT)
    present = {e["kind"] for e in log if e["kept"]}
    for kind in KINDS:
        expected = 100.0 if kind in present else 0.0
        assert abs(sum(float(r[kind]) for r in rows(tables["code_freq.csv"])) - expected) <= 0.01
        assert abs(sum(float(r[kind]) for r in rows(tables["visit_freq.csv"])) - expected) <= 0.01
        heat = [r for r in rows(tables["heatmap.csv"]) if r["kind"] == kind]
        total = sum(float(v) for r in heat for k, v in r.items() if k.startswith("visit_"))
        assert abs(total - expected) <= 0.01
