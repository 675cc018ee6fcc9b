"""Before/after metrics for the four evaluation cases.

c1: only censored patients attacked; c2: only observed; ct: everyone;
cob: everyone, reported when the target set is entirely observed.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..errors import NoObservedPatients, NoPermissiblePairs
from ..metrics import PredictionSet, c_index, mae
from ..protocols import SurvivalModel
from ..records import Cohort, Patient
from .greedy import AttackConfig
from .population import Budget, DSAResult, PatientAttack, dsa_attack


def _safe(fn, preds):
    try:
        return fn(preds)
    except (NoPermissiblePairs, NoObservedPatients):
        return None


def cohort_metrics(cohort: Cohort, victim: SurvivalModel) -> dict:
    preds = PredictionSet.from_patients(cohort.patients,
                                        [victim.predict_time(p.record) for p in cohort])
    return {"c_index": _safe(c_index, preds), "mae": _safe(mae, preds)}


@dataclass
class CaseEvaluation:
    pre: dict
    cases: dict
    full: DSAResult
    observed_only: DSAResult

    def case_cohort(self, name: str) -> Cohort:
        return self.cases[name]["cohort"]


def evaluate_cases(target: Cohort, victim: SurvivalModel, strategy: PatientAttack,
                   config: AttackConfig = AttackConfig(), budget: Budget = None,
                   workers: int = 1) -> CaseEvaluation:
    full = dsa_attack(target, victim, strategy, config, budget=budget, workers=workers)
    observed_only = dsa_attack(target, victim, strategy, config, attack_censored=False,
                               budget=budget)
    # step 1 is identical in both runs, so c1 reuses the censored half of the full run
    c1 = Cohort(tuple(
        Patient(full.results[p.id].adversarial if p.label.event == 0 and p.id in full.results
                else p.record, p.label)
        for p in target), target.seed, target.config_hash)
    cases = {
        "c1": {"cohort": c1},
        "c2": {"cohort": observed_only.adversarial},
        "ct": {"cohort": full.adversarial},
    }
    if all(p.label.event == 1 for p in target):
        cases["cob"] = {"cohort": full.adversarial}
    pre = cohort_metrics(target, victim)
    for case in cases.values():
        case["pre"] = pre
        case["post"] = cohort_metrics(case["cohort"], victim)
    return CaseEvaluation(pre, cases, full, observed_only)


def summarize(evaluation: CaseEvaluation, target: Cohort) -> dict:
    """JSON-ready summary of a case evaluation (no timings, so reruns are byte-identical)."""
    results = [evaluation.full.results[p.id] for p in target if p.id in evaluation.full.results]
    kinds = Counter(k.action.kind.value for r in results for k in r.kept)
    sims = [r.final_similarity for r in results]
    n_cen = sum(1 for p in target if p.label.event == 0)
    return {
        "n_patients": len(target),
        "n_censored": n_cen,
        "n_observed": len(target) - n_cen,
        "cases": {name: {"pre": c["pre"], "post": c["post"]}
                  for name, c in evaluation.cases.items()},
        "terminations": dict(sorted(Counter(r.termination.value for r in results).items())),
        "successes": sum(1 for r in results if r.success),
        "kept_actions": {k: kinds.get(k, 0) for k in ("add", "remove", "replace")},
        "similarity": {"min": min(sims) if sims else None,
                       "mean": float(np.mean(sims)) if sims else None},
        "t_min": {"initial": evaluation.full.t_min_initial,
                  "final": evaluation.full.t_min_trace[-1]},
        "failures": dict(sorted(evaluation.full.failures.items())),
    }
