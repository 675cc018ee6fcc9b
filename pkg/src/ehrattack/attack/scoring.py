"""Candidate enumeration and composite scoring.

A candidate's saliency is the change in predicted survival time it causes; its
similarity index is the record similarity before/after. The composite score
``dF * exp(lam * SI)`` favours large output changes that stay semantically
close. For a decrease attack the scores are negated before sorting.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from ..errors import DegenerateRecord
from ..ontology import CooccurrenceTable, Ontology, SynonymSet, synonym_set
from ..protocols import SurvivalModel
from ..records import ActionKind, AdversarialAction, PatientRecord, apply_action
from ..similarity import Encoder, record_similarity


class Direction(enum.IntEnum):
    INCREASE = 1
    DECREASE = -1

    @classmethod
    def toward(cls, predicted: float, target: float) -> "Direction":
        return cls.INCREASE if predicted < target else cls.DECREASE


class AttackContext:
    """Read-only knowledge shared by every per-patient attack."""

    def __init__(self, ontology: Ontology, cooccurrence: CooccurrenceTable,
                 encoder: Encoder, p: float = 0.75):
        self.ontology = ontology
        self.cooccurrence = cooccurrence
        self.encoder = encoder
        self.p = p
        self._synonyms: dict = {}

    def synonyms(self, code: str) -> SynonymSet:
        s = self._synonyms.get(code)
        if s is None:
            s = self._synonyms[code] = synonym_set(self.ontology, self.cooccurrence, code, self.p)
        return s

    def similarity(self, a: PatientRecord, b: PatientRecord) -> Optional[float]:
        """Record similarity, or None when either record has no codes left."""
        try:
            return record_similarity(self.encoder, a, b)
        except DegenerateRecord:
            return None


def composite_score(delta_f: float, si: float, lam: float) -> float:
    return delta_f * math.exp(lam * si)


@dataclass(frozen=True)
class ScoredAction:
    action: AdversarialAction
    delta_f: float
    si: float
    h: float
    direction_sign: int

    def sort_key(self):
        a = self.action
        return (-self.h, -abs(self.delta_f), a.visit_index, a.target_code, a.kind.value,
                a.synonym_code or "")


def _scored(action, delta_f, si, lam, direction) -> ScoredAction:
    sign = int(direction)
    return ScoredAction(action, delta_f, si, sign * composite_score(delta_f, si, lam), sign)


def score_candidates(record: PatientRecord, victim: SurvivalModel, context: AttackContext,
                     lam: float, direction: Direction) -> list:
    """Score one removal per code occurrence and one addition per eligible synonym.

    Additions go into the anchor's visit and are de-duplicated per
    (visit, synonym). Removals that would leave the record without any code are
    not candidates, since their similarity is undefined.
    """
    base = victim.predict_time(record)
    present = record.all_codes()
    out = []
    seen_adds = set()
    for n, c in record.occurrences():
        action = AdversarialAction(ActionKind.REMOVE, n, c)
        removed = apply_action(record, action)
        si = context.similarity(record, removed)
        if si is not None:
            out.append(_scored(action, victim.predict_time(removed) - base, si, lam, direction))
        for s in context.synonyms(c):
            if s in present or (n, s) in seen_adds:
                continue
            seen_adds.add((n, s))
            action = AdversarialAction(ActionKind.ADD, n, c, s)
            added = apply_action(record, action)
            si = context.similarity(record, added)
            out.append(_scored(action, victim.predict_time(added) - base, si, lam, direction))
    out.sort(key=ScoredAction.sort_key)
    return out


def select_replacement(current: PatientRecord, visit_index: int, code: str,
                       synonyms, victim: SurvivalModel, context: AttackContext,
                       lam: float, direction: Direction) -> Optional[ScoredAction]:
    """Best synonym to swap in for `code`, scored against the current record.

    Synonyms already present anywhere in the record are skipped. The argmax is
    taken over the direction-signed composite score; ties keep synonym order.
    """
    present = current.all_codes()
    base = None
    best = None
    for s in synonyms:
        if s in present:
            continue
        if base is None:
            base = victim.predict_time(current)
        action = AdversarialAction(ActionKind.REPLACE, visit_index, code, s)
        swapped = apply_action(current, action)
        si = context.similarity(current, swapped)
        cand = _scored(action, victim.predict_time(swapped) - base, si, lam, direction)
        if best is None or cand.h > best.h:
            best = cand
    return best
