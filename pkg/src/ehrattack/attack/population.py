"""Population attacks: the moving-target DSA strategy and the random baseline.

DSA first lowers every censored patient's prediction (target 0), then walks the
observed patients in true-time order, pushing each one just above a running
threshold ``t_min`` that starts at the highest post-attack censored prediction
and ratchets up to each observed patient's new prediction.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

import numpy as np

from ..protocols import SurvivalModel
from ..records import ActionKind, AdversarialAction, Cohort, Patient, PatientRecord, apply_action
from .greedy import AttackConfig, AttackResult, KeptAction, LogEntry, Termination, greedy_attack
from .scoring import AttackContext, Direction

Budget = Union[None, int, Mapping[str, int]]


def random_attack(record: PatientRecord, victim: SurvivalModel, target: float,
                  context: AttackContext, budget: int, config: AttackConfig = AttackConfig(),
                  seed: Optional[int] = None, floor: Optional[float] = None) -> AttackResult:
    """Apply uniformly sampled legal actions until `budget` of them are kept.

    Actions are kept whatever their effect on the prediction; only the
    similarity threshold is enforced (breaching actions are reversed). At most
    ``3 * budget + 10`` actions are tried.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    rng = np.random.default_rng(_patient_seed(config.seed if seed is None else seed, record.id))
    t0 = victim.predict_time(record)
    direction = Direction.toward(t0, target)
    current, t_cur = record, t0
    kept, log, trajectory = [], [], [t0]
    termination = Termination.BUDGET_EXHAUSTED
    attempts = 0
    while len(kept) < budget:
        if attempts >= 3 * budget + 10:
            termination = Termination.CANDIDATES_EXHAUSTED
            break
        legal = _legal_actions(current, context)
        if not legal:
            termination = Termination.CANDIDATES_EXHAUSTED
            break
        attempts += 1
        action = legal[int(rng.integers(len(legal)))]
        trial = apply_action(current, action)
        t_new = victim.predict_time(trial)
        si = context.similarity(record, trial)
        if si is None or si < config.theta:
            log.append(LogEntry(record.id, action, t_new - t_cur, -1.0 if si is None else si, False))
            continue
        kept.append(KeptAction(action, t_new - t_cur, si, t_new))
        log.append(LogEntry(record.id, action, t_new - t_cur, si, True))
        trajectory.append(t_new)
        current, t_cur = trial, t_new
    if floor is not None:
        success = t_cur > floor
    else:
        success = t_cur > target if direction is Direction.INCREASE else t_cur < target
    final_sim = 1.0 if current == record else context.similarity(record, current)
    return AttackResult(record, current, kept, log, t0, t_cur, target, direction, success,
                        final_sim, termination, "random", floor, trajectory, config.theta)


def _patient_seed(seed: int, patient_id: str) -> list:
    return [seed, zlib.crc32(patient_id.encode())]


def _legal_actions(record: PatientRecord, context: AttackContext) -> list:
    present = record.all_codes()
    total = record.n_codes()
    out = []
    for n, c in record.occurrences():
        if total > 1:
            out.append(AdversarialAction(ActionKind.REMOVE, n, c))
        for s in context.synonyms(c):
            if s not in present:
                out.append(AdversarialAction(ActionKind.ADD, n, c, s))
                out.append(AdversarialAction(ActionKind.REPLACE, n, c, s))
    # one add per (visit, synonym)
    seen, unique = set(), []
    for a in out:
        key = (a.kind, a.visit_index, a.synonym_code) if a.kind is ActionKind.ADD else a
        if key not in seen:
            seen.add(key)
            unique.append(a)
    return unique


# -- DSA ---------------------------------------------------------------------

PatientAttack = Callable[..., AttackResult]


@dataclass
class GreedyStrategy:
    """Per-patient attack used by DSA; picklable so step 1 can run in worker processes."""
    victim: SurvivalModel
    context: AttackContext
    config: AttackConfig

    def __call__(self, record, target, floor=None, budget=None) -> AttackResult:
        return greedy_attack(record, self.victim, target, self.context, self.config,
                             floor=floor, budget=budget)


@dataclass
class RandomStrategy:
    victim: SurvivalModel
    context: AttackContext
    config: AttackConfig
    default_budget: int = 10

    def __call__(self, record, target, floor=None, budget=None) -> AttackResult:
        b = self.default_budget if budget is None else budget
        return random_attack(record, self.victim, target, self.context, b, self.config,
                             floor=floor)


@dataclass
class DSAResult:
    adversarial: Cohort
    results: dict
    t_min_initial: float
    t_min_trace: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def log_entries(self, order) -> list:
        out = []
        for pid in order:
            r = self.results.get(pid)
            if r is not None:
                out.extend(r.log)
        return out


def _budget_for(budget: Budget, pid: str) -> Optional[int]:
    if budget is None or isinstance(budget, int):
        return budget
    return budget.get(pid, 0)


_worker_state: dict = {}


def _init_worker(strategy):
    _worker_state["strategy"] = strategy


def _run_censored(args, strategy=None):
    record, budget = args
    strategy = strategy or _worker_state["strategy"]
    try:
        return strategy(record, 0.0, None, budget), None
    except Exception as exc:  # recorded per patient, never aborts the run
        return None, f"{type(exc).__name__}: {exc}"


def dsa_attack(target_set: Cohort, victim: SurvivalModel, strategy: PatientAttack,
               config: AttackConfig = AttackConfig(), attack_censored: bool = True,
               attack_observed: bool = True, budget: Budget = None,
               workers: int = 1) -> DSAResult:
    """Run the two-step DSA population attack.

    ``attack_censored=False`` skips step 1 (t_min then starts from the highest
    unattacked censored prediction); ``attack_observed=False`` skips step 2.
    Per-patient exceptions are recorded in ``failures`` and the patient keeps
    its original record.
    """
    if len(target_set) == 0:
        raise ValueError("DSA needs at least one target patient")
    censored = [p for p in target_set if p.label.event == 0]
    observed = [p for p in target_set if p.label.event == 1]
    results: dict = {}
    failures: dict = {}
    final: dict = {p.id: p.record for p in target_set}

    if attack_censored and censored:
        jobs = [(p.record, _budget_for(budget, p.id)) for p in censored]
        if workers > 1:
            # step 1 targets are independent; order of results follows input order
            with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                     initargs=(strategy,)) as pool:
                outcomes = list(pool.map(_run_censored, jobs, chunksize=8))
        else:
            outcomes = [_run_censored(j, strategy) for j in jobs]
        for p, (res, err) in zip(censored, outcomes):
            if res is None:
                failures[p.id] = err
            else:
                results[p.id] = res
                final[p.id] = res.adversarial

    cen_preds = []
    for p in censored:
        if p.id in results:
            cen_preds.append(results[p.id].t_after)
        elif p.id not in failures:
            try:
                cen_preds.append(victim.predict_time(p.record))
            except Exception as exc:
                failures[p.id] = f"{type(exc).__name__}: {exc}"
    t_min = max(cen_preds) if cen_preds else 0.0
    t_min_initial = t_min
    trace = [t_min]

    if attack_observed and observed:
        reverse = config.dsa_order == "desc_true_time"
        ordered = sorted(observed, key=lambda p: (p.label.time, p.id), reverse=reverse)
        for p in ordered:
            try:
                t0 = victim.predict_time(p.record)
                floor = None if t0 < t_min else t_min
                res = strategy(p.record, t_min, floor, _budget_for(budget, p.id))
            except Exception as exc:
                failures[p.id] = f"{type(exc).__name__}: {exc}"
                continue
            results[p.id] = res
            final[p.id] = res.adversarial
            if res.t_after > t_min:
                t_min = res.t_after
            trace.append(t_min)

    patients = tuple(Patient(final[p.id], p.label) for p in target_set)
    adversarial = Cohort(patients, target_set.seed, target_set.config_hash)
    return DSAResult(adversarial, results, t_min_initial, trace, failures)
