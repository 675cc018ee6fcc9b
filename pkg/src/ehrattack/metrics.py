"""Harrell's concordance index and MAE for censored survival predictions.

Pair rules (for a pair whose members have different true times):

1. both observed: rank by true time;
2. both censored: excluded;
3. censored vs observed: rankable only when the observed member's time is
   the earlier one.

Equivalently, a pair is permissible iff its earlier-time member is observed.
Pairs with equal true times are excluded.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoObservedPatients, NoPermissiblePairs


class PairClass(str, enum.Enum):
    CONCORDANT = "concordant"
    DISCORDANT = "discordant"
    TIED = "tied"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class PredictionSet:
    time: np.ndarray
    event: np.ndarray
    predicted: np.ndarray
    ids: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.time, dtype=float)
        e = np.asarray(self.event, dtype=int)
        p = np.asarray(self.predicted, dtype=float)
        if not (t.shape == e.shape == p.shape) or t.ndim != 1:
            raise ValueError("time, event and predicted must be aligned 1-d arrays")
        if not np.all(np.isfinite(p)):
            raise ValueError("predicted times must be finite")
        if np.any(t < 0) or not np.all(np.isin(e, (0, 1))):
            raise ValueError("times must be >= 0 and events in {0, 1}")
        object.__setattr__(self, "time", t)
        object.__setattr__(self, "event", e)
        object.__setattr__(self, "predicted", p)
        object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self):
        return len(self.time)

    @classmethod
    def from_patients(cls, patients: Sequence, predicted: Sequence[float]) -> "PredictionSet":
        return cls(np.array([p.label.time for p in patients]),
                   np.array([p.label.event for p in patients]),
                   np.asarray(predicted, dtype=float),
                   tuple(p.id for p in patients))


@dataclass(frozen=True)
class PairTally:
    permissible: int
    concordant: int
    discordant: int
    tied: int

    def to_dict(self) -> dict:
        return {"permissible": self.permissible, "concordant": self.concordant,
                "discordant": self.discordant, "tied": self.tied}


def classify_pair(t_i, k_i, p_i, t_j, k_j, p_j) -> PairClass:
    """Apply the three pair-type rules to one unordered pair."""
    if k_i == 0 and k_j == 0:
        return PairClass.EXCLUDED
    if k_i == 1 and k_j == 1:
        if t_i == t_j:
            return PairClass.EXCLUDED
        early, late = (p_i, p_j) if t_i < t_j else (p_j, p_i)
    else:
        # mixed pair: the observed member must come strictly first
        (t_o, p_o), (t_c, p_c) = ((t_i, p_i), (t_j, p_j)) if k_i == 1 else ((t_j, p_j), (t_i, p_i))
        if not t_o < t_c:
            return PairClass.EXCLUDED
        early, late = p_o, p_c
    if early < late:
        return PairClass.CONCORDANT
    if early > late:
        return PairClass.DISCORDANT
    return PairClass.TIED


def pair_tally(preds: PredictionSet) -> PairTally:
    """Tally unordered pairs by rule type; vectorised twin of :func:`classify_pair`."""
    t, k, p = preds.time, preds.event, preds.predicted
    i, j = np.triu_indices(len(t), k=1)
    ti, tj, ki, kj, pi, pj = t[i], t[j], k[i], k[j], p[i], p[j]
    # rule 1: both observed, distinct true times
    both_obs = (ki == 1) & (kj == 1) & (ti != tj)
    i_first = ti < tj
    early_o = np.where(i_first, pi, pj)
    late_o = np.where(i_first, pj, pi)
    # rule 3: one censored, observed member strictly earlier (rule 2 pairs never match)
    mixed = ki != kj
    t_obs = np.where(ki == 1, ti, tj)
    t_cen = np.where(ki == 1, tj, ti)
    p_obs = np.where(ki == 1, pi, pj)
    p_cen = np.where(ki == 1, pj, pi)
    mixed &= t_obs < t_cen
    early = np.where(both_obs, early_o, p_obs)[both_obs | mixed]
    late = np.where(both_obs, late_o, p_cen)[both_obs | mixed]
    return PairTally(int(len(early)), int(np.sum(early < late)), int(np.sum(early > late)),
                     int(np.sum(early == late)))


def c_index(preds: PredictionSet) -> float:
    tally = pair_tally(preds)
    if tally.permissible == 0:
        raise NoPermissiblePairs("no permissible pairs in prediction set")
    return (tally.concordant + 0.5 * tally.tied) / tally.permissible


def c_index_formula(preds: PredictionSet) -> float:
    """Literal indicator-sum evaluation over ordered pairs (cross-check for :func:`c_index`).

    Both numerator and denominator are gated on the event indicator of the
    earlier member ``i``.
    """
    t, k, p = preds.time.tolist(), preds.event.tolist(), preds.predicted.tolist()
    num = 0.0
    den = 0
    n = len(t)
    for i in range(n):
        for j in range(n):
            gate = (1 if t[i] < t[j] else 0) * k[i]
            if not gate:
                continue
            den += 1
            num += (1.0 if p[i] < p[j] else 0.0) + 0.5 * (1.0 if p[i] == p[j] else 0.0)
    if den == 0:
        raise NoPermissiblePairs("no permissible pairs in prediction set")
    return num / den


def mae(preds: PredictionSet) -> float:
    observed = preds.event == 1
    if not observed.any():
        raise NoObservedPatients("MAE needs at least one observed patient")
    return float(np.mean(np.abs(preds.time[observed] - preds.predicted[observed])))


def metric_report(preds: PredictionSet) -> dict:
    """JSON-ready report; MAE is None when nobody is observed."""
    tally = pair_tally(preds)
    try:
        err = mae(preds)
    except NoObservedPatients:
        err = None
    ci = (tally.concordant + 0.5 * tally.tied) / tally.permissible if tally.permissible else None
    return {"c_index": ci, "mae": err, "pairs": tally.to_dict(),
            "tie_rule": "pairs with equal true times are excluded"}
