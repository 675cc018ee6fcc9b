"""Patients, visits, survival labels and the perturbation actions applied to them.

Records are immutable. Codes are plain string ids; a visit holds a frozenset of
them and keeps its 1-based position even when perturbation empties it.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Iterator, Optional

from .errors import ParseError, PreconditionViolation

if TYPE_CHECKING:
    from .ontology import Ontology

COHORT_KEYS = ("id", "visits", "time", "event")


class CodeKind(str, enum.Enum):
    DIAGNOSIS = "diagnosis"
    DRUG = "drug"


class ActionKind(str, enum.Enum):
    REMOVE = "remove"
    ADD = "add"
    REPLACE = "replace"


@dataclass(frozen=True)
class Visit:
    index: int
    codes: frozenset

    def __len__(self):
        return len(self.codes)

    def __contains__(self, code):
        return code in self.codes


@dataclass(frozen=True)
class PatientRecord:
    id: str
    visits: tuple

    @classmethod
    def from_lists(cls, id: str, visits: Iterable[Iterable[str]]) -> "PatientRecord":
        """Build a record from nested code lists; duplicates within a visit collapse."""
        return cls(id, tuple(Visit(n, frozenset(v)) for n, v in enumerate(visits, start=1)))

    @property
    def n_visits(self) -> int:
        return len(self.visits)

    def visit(self, index: int) -> Visit:
        if not 1 <= index <= len(self.visits):
            raise IndexError(f"record {self.id} has no visit {index}")
        return self.visits[index - 1]

    def all_codes(self) -> frozenset:
        out = set()
        for v in self.visits:
            out |= v.codes
        return frozenset(out)

    def n_codes(self) -> int:
        return sum(len(v) for v in self.visits)

    def occurrences(self) -> Iterator[tuple]:
        """Yield (visit_index, code) for every code, visits in order, codes sorted."""
        for v in self.visits:
            for c in sorted(v.codes):
                yield v.index, c

    def to_lists(self) -> list:
        return [sorted(v.codes) for v in self.visits]

    def with_visit(self, index: int, codes: frozenset) -> "PatientRecord":
        visits = list(self.visits)
        visits[index - 1] = Visit(index, frozenset(codes))
        return PatientRecord(self.id, tuple(visits))


@dataclass(frozen=True)
class SurvivalLabel:
    time: float
    event: int

    def __post_init__(self):
        if not self.time >= 0:
            raise ValueError(f"survival time must be >= 0, got {self.time}")
        if self.event not in (0, 1):
            raise ValueError(f"event indicator must be 0 or 1, got {self.event}")

    @property
    def censored(self) -> bool:
        return self.event == 0


@dataclass(frozen=True)
class Patient:
    record: PatientRecord
    label: SurvivalLabel

    @property
    def id(self) -> str:
        return self.record.id


@dataclass(frozen=True)
class Cohort:
    patients: tuple
    seed: Optional[int] = None
    config_hash: Optional[str] = None

    def __post_init__(self):
        ids = [p.id for p in self.patients]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate patient ids: {dup[:5]}")

    def __len__(self):
        return len(self.patients)

    def __iter__(self):
        return iter(self.patients)

    def by_id(self) -> dict:
        return {p.id: p for p in self.patients}

    def subset(self, ids: Iterable[str]) -> "Cohort":
        lookup = self.by_id()
        return Cohort(tuple(lookup[i] for i in ids), self.seed, self.config_hash)

    def vocabulary(self) -> list:
        codes = set()
        for p in self.patients:
            codes |= p.record.all_codes()
        return sorted(codes)


@dataclass(frozen=True)
class AdversarialAction:
    kind: ActionKind
    visit_index: int
    target_code: str
    synonym_code: Optional[str] = None

    def __post_init__(self):
        if self.kind is ActionKind.REMOVE:
            if self.synonym_code is not None:
                raise ValueError("remove actions carry no synonym")
        else:
            if self.synonym_code is None:
                raise ValueError(f"{self.kind.value} requires a synonym code")
            if self.synonym_code == self.target_code:
                raise ValueError("synonym must differ from target code")

    @property
    def attacked_code(self) -> str:
        """Code credited in frequency reports: the inserted code for add, else the target."""
        return self.synonym_code if self.kind is ActionKind.ADD else self.target_code

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "visit": self.visit_index,
                "code": self.target_code, "synonym": self.synonym_code}

    @classmethod
    def from_dict(cls, d: dict) -> "AdversarialAction":
        return cls(ActionKind(d["kind"]), int(d["visit"]), d["code"], d.get("synonym"))


def validate_record(record: PatientRecord, ontology: "Optional[Ontology]" = None) -> list:
    """Return human-readable invariant violations; empty when the record is well formed."""
    problems = []
    if not record.id:
        problems.append("record id is empty")
    if not record.visits:
        problems.append(f"record {record.id}: no visits")
    for pos, v in enumerate(record.visits, start=1):
        if v.index != pos:
            problems.append(f"record {record.id}: visit at position {pos} has index {v.index}")
        raw = v.codes
        if not isinstance(raw, (set, frozenset)):
            counts = {}
            for c in raw:
                counts[c] = counts.get(c, 0) + 1
            for c in sorted(k for k, n in counts.items() if n > 1):
                problems.append(f"record {record.id}: visit {pos} has duplicate code {c!r}")
        for c in sorted(set(raw)):
            if not isinstance(c, str) or not c:
                problems.append(f"record {record.id}: visit {pos} has empty code id")
            elif ontology is not None and not ontology.is_leaf(c):
                problems.append(f"record {record.id}: visit {pos} has unknown code {c!r}")
    if record.visits and record.n_codes() == 0:
        problems.append(f"record {record.id}: no codes")
    return problems


def apply_action(record: PatientRecord, action: AdversarialAction) -> PatientRecord:
    """Return a new record with `action` applied; the input is never modified."""
    visit = record.visit(action.visit_index)
    codes = set(visit.codes)
    if action.kind in (ActionKind.REMOVE, ActionKind.REPLACE):
        if action.target_code not in codes:
            raise PreconditionViolation(
                f"{action.target_code!r} not in visit {action.visit_index} of {record.id}")
        codes.discard(action.target_code)
    if action.kind in (ActionKind.ADD, ActionKind.REPLACE):
        if action.synonym_code in record.all_codes():
            raise PreconditionViolation(
                f"{action.synonym_code!r} already present in record {record.id}")
        codes.add(action.synonym_code)
    return record.with_visit(action.visit_index, frozenset(codes))


def replay(record: PatientRecord, actions: Iterable[AdversarialAction]) -> PatientRecord:
    for a in actions:
        record = apply_action(record, a)
    return record


# -- cohort JSON Lines -------------------------------------------------------

def patient_to_json(p: Patient) -> str:
    obj = {"id": p.id, "visits": p.record.to_lists(),
           "time": float(p.label.time), "event": int(p.label.event)}
    return json.dumps(obj, separators=(",", ":"))


def patient_from_json(line: str, lineno: int = 0) -> Patient:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ParseError(f"line {lineno}: expected an object")
    keys = set(obj)
    extra = keys - set(COHORT_KEYS)
    if extra:
        raise ParseError(f"line {lineno}: unknown keys {sorted(extra)}")
    missing = set(COHORT_KEYS) - keys
    if missing:
        raise ParseError(f"line {lineno}: missing keys {sorted(missing)}")
    visits = obj["visits"]
    if not isinstance(visits, list) or not all(isinstance(v, list) for v in visits):
        raise ParseError(f"line {lineno}: visits must be a list of lists")
    for v in visits:
        if len(set(v)) != len(v):
            raise ParseError(f"line {lineno}: duplicate code within a visit of {obj['id']}")
    if obj["event"] not in (0, 1) or isinstance(obj["event"], bool):
        raise ParseError(f"line {lineno}: event must be 0 or 1")
    time = obj["time"]
    if isinstance(time, bool) or not isinstance(time, (int, float)) or time < 0:
        raise ParseError(f"line {lineno}: time must be a non-negative number")
    record = PatientRecord.from_lists(str(obj["id"]), visits)
    return Patient(record, SurvivalLabel(float(time), int(obj["event"])))


def write_cohort(cohort: Cohort, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in cohort.patients:
            fh.write(patient_to_json(p))
            fh.write("\n")


def read_cohort(path, seed=None, config_hash=None) -> Cohort:
    patients = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            patients.append(patient_from_json(line, lineno))
    return Cohort(tuple(patients), seed, config_hash)


def cohort_lines(cohort: Cohort) -> str:
    return "".join(patient_to_json(p) + "\n" for p in cohort.patients)


__all__ = [
    "ActionKind", "AdversarialAction", "CodeKind", "Cohort", "Patient", "PatientRecord",
    "SurvivalLabel", "Visit", "apply_action", "read_cohort", "replay", "validate_record",
    "write_cohort",
]
