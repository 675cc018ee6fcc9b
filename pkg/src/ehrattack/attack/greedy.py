"""Per-patient greedy attack over composite-scored candidates."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from ..protocols import SurvivalModel
from ..records import ActionKind, AdversarialAction, PatientRecord, apply_action
from .scoring import AttackContext, Direction, score_candidates, select_replacement

DSA_ORDERS = ("desc_true_time", "asc_true_time")


@dataclass(frozen=True)
class AttackConfig:
    lam: float = 5.0
    theta: float = 0.90
    p: float = 0.75
    break_on_breach: bool = True
    dsa_order: str = "desc_true_time"
    epsilon_margin: float = 1e-6
    max_actions: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("attack.lam must be >= 0")
        if not 0 <= self.theta <= 1:
            raise ValueError("attack.theta must lie in [0, 1]")
        if not 0 <= self.p <= 1:
            raise ValueError("attack.p must lie in [0, 1]")
        if self.dsa_order not in DSA_ORDERS:
            raise ValueError(f"attack.dsa_order must be one of {DSA_ORDERS}")
        if self.epsilon_margin <= 0:
            raise ValueError("attack.epsilon_margin must be positive")
        if self.max_actions is not None and self.max_actions < 0:
            raise ValueError("attack.max_actions must be >= 0")


class Termination(str, enum.Enum):
    TARGET_REACHED = "target_reached"
    CANDIDATES_EXHAUSTED = "candidates_exhausted"
    SIMILARITY_BREAK = "similarity_break"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class KeptAction:
    action: AdversarialAction
    delta_f: float
    si: float
    t_after: float


@dataclass(frozen=True)
class LogEntry:
    """One applied action: kept, or reversed for breaching the similarity threshold."""
    patient: str
    action: AdversarialAction
    delta_f: float
    si: float
    kept: bool

    def to_dict(self) -> dict:
        a = self.action
        return {"patient": self.patient, "kind": a.kind.value, "visit": a.visit_index,
                "code": a.target_code, "synonym": a.synonym_code, "dF": self.delta_f,
                "si": self.si, "kept": self.kept}


@dataclass
class AttackResult:
    original: PatientRecord
    adversarial: PatientRecord
    kept: list
    log: list
    t_before: float
    t_after: float
    target: float
    direction: Direction
    success: bool
    final_similarity: float
    termination: Termination
    attacker: str = "greedy"
    floor: Optional[float] = None
    trajectory: list = field(default_factory=list)
    theta: Optional[float] = None

    @property
    def patient_id(self) -> str:
        return self.original.id

    @property
    def kept_actions(self) -> list:
        return [k.action for k in self.kept]


def _reached(direction: Direction, t: float, target: float) -> bool:
    return t > target if direction is Direction.INCREASE else t < target


def greedy_attack(record: PatientRecord, victim: SurvivalModel, target: float,
                  context: AttackContext, config: AttackConfig = AttackConfig(),
                  floor: Optional[float] = None, budget: Optional[int] = None) -> AttackResult:
    """Greedily perturb `record` to push the victim's prediction past `target`.

    Parameters
    ----------
    floor : optional lower bound for decrease attacks. Candidates that would
        bring the prediction to ``floor + epsilon_margin`` or below are skipped,
        and success then means ending strictly above ``floor``.
    budget : optional cap on kept actions; overrides ``config.max_actions``.

    Similarity is always measured against the unmodified `record`.
    """
    if target < 0:
        raise ValueError("target time must be >= 0")
    budget = config.max_actions if budget is None else budget
    t0 = victim.predict_time(record)
    direction = Direction.toward(t0, target)
    sign = int(direction)
    theta = config.theta
    limit = None if floor is None else floor + config.epsilon_margin

    def acceptable(t_new, t_cur):
        if sign * (t_new - t_cur) <= 0:
            return False
        return limit is None or t_new > limit

    current, t_cur = record, t0
    kept, log, trajectory = [], [], [t0]
    termination = Termination.CANDIDATES_EXHAUSTED

    def keep(action, new_record, t_new, si):
        nonlocal current, t_cur
        kept.append(KeptAction(action, t_new - t_cur, si, t_new))
        log.append(LogEntry(record.id, action, t_new - t_cur, si, True))
        trajectory.append(t_new)
        current, t_cur = new_record, t_new

    if budget == 0:
        candidates = []
        termination = Termination.BUDGET_EXHAUSTED
    else:
        candidates = score_candidates(record, victim, context, config.lam, direction)

    for cand in candidates:
        action = cand.action
        n = action.visit_index
        if action.kind is ActionKind.ADD:
            if action.synonym_code in current.all_codes():
                continue
            trial = apply_action(current, action)
            t_new = victim.predict_time(trial)
            if not acceptable(t_new, t_cur):
                continue
            si = context.similarity(record, trial)
            if si < theta:
                log.append(LogEntry(record.id, action, t_new - t_cur, si, False))
                if config.break_on_breach:
                    termination = Termination.SIMILARITY_BREAK
                    break
                continue
            keep(action, trial, t_new, si)
        else:
            c = action.target_code
            if c not in current.visit(n):
                continue
            options = []
            breached = False
            removed = apply_action(current, action)
            t_rem = victim.predict_time(removed)
            # removing the last code of the record is never legal (si is None)
            si = context.similarity(record, removed) if acceptable(t_rem, t_cur) else None
            if si is not None:
                if si >= theta:
                    options.append((abs(t_rem - t_cur), 0, action, removed, t_rem, si))
                else:
                    # a breaching removal does not stop the attack; the replacement is still tried
                    breached = True
                    log.append(LogEntry(record.id, action, t_rem - t_cur, si, False))
            rep = select_replacement(current, n, c, context.synonyms(c), victim, context,
                                     config.lam, direction)
            if rep is not None:
                swapped = apply_action(current, rep.action)
                t_rep = victim.predict_time(swapped)
                if acceptable(t_rep, t_cur):
                    si = context.similarity(record, swapped)
                    if si >= theta:
                        options.append((abs(t_rep - t_cur), 1, rep.action, swapped, t_rep, si))
                    else:
                        breached = True
                        log.append(LogEntry(record.id, rep.action, t_rep - t_cur, si, False))
            if options:
                # larger |dF| wins; removal wins ties
                _, _, chosen, new_record, t_new, si = max(options, key=lambda o: (o[0], -o[1]))
                keep(chosen, new_record, t_new, si)
            elif breached and config.break_on_breach:
                # neither outcome satisfies the threshold
                termination = Termination.SIMILARITY_BREAK
                break
            else:
                continue
        if _reached(direction, t_cur, target) and floor is None:
            termination = Termination.TARGET_REACHED
            break
        if budget is not None and len(kept) >= budget:
            termination = Termination.BUDGET_EXHAUSTED
            break

    success = t_cur > floor if floor is not None else _reached(direction, t_cur, target)
    final_sim = 1.0 if current == record else context.similarity(record, current)
    return AttackResult(record, current, kept, log, t0, t_cur, target, direction, success,
                        final_sim, termination, "greedy", floor, trajectory, theta)
