"""Seeded synthetic ontology and cohort generation with known ground truth.

Patients draw a few leaf-parent groups ("conditions"), keep a per-patient
subset of each group's children, and fill every visit from that pool. This
clusters codes by parent, so siblings co-occur and the synonym filter has
something to keep. Event times are exponential with log-rate w*.x + b0 over
the same recency-weighted features the reference victims use; censoring is an
independent exponential whose rate is solved for the target censored fraction.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .ontology import ROOT, Ontology
from .records import CodeKind, Cohort, Patient, PatientRecord, SurvivalLabel
from .victim.features import Vocabulary, featurize_many

ROOTS = {"D": CodeKind.DIAGNOSIS, "R": CodeKind.DRUG}


@dataclass(frozen=True)
class GeneratorConfig:
    branching: int = 4
    depth: int = 3
    n_patients: int = 2300
    n_target: int = 300
    visits: int = 5
    codes_per_visit: tuple = (4, 10)
    groups_per_patient: tuple = (3, 5)
    affinity: tuple = (0.6, 0.95)
    noise_rate: float = 0.03
    base_weight_sd: float = 0.1
    high_risk_fraction: float = 0.1
    high_risk_scale: float = 1.0
    censored_fraction: float = 0.84
    time_scale: float = 5.0
    rho: float = 0.7
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "codes_per_visit", tuple(self.codes_per_visit))
        object.__setattr__(self, "groups_per_patient", tuple(self.groups_per_patient))
        object.__setattr__(self, "affinity", tuple(self.affinity))
        checks = [
            (self.branching >= 2, "gen.branching must be >= 2"),
            (self.depth >= 2, "gen.depth must be >= 2"),
            (self.n_patients >= 1, "gen.n_patients must be >= 1"),
            (0 <= self.n_target <= self.n_patients, "gen.n_target must lie in [0, n_patients]"),
            (self.visits >= 1, "gen.visits must be >= 1"),
            (len(self.codes_per_visit) == 2 and 1 <= self.codes_per_visit[0] <= self.codes_per_visit[1],
             "gen.codes_per_visit must be [min, max] with 1 <= min <= max"),
            (len(self.groups_per_patient) == 2 and 1 <= self.groups_per_patient[0] <= self.groups_per_patient[1],
             "gen.groups_per_patient must be [min, max] with 1 <= min <= max"),
            (len(self.affinity) == 2 and 0 < self.affinity[0] <= self.affinity[1] <= 1,
             "gen.affinity must be [lo, hi] within (0, 1]"),
            (0 <= self.noise_rate < 1, "gen.noise_rate must lie in [0, 1)"),
            (0 < self.high_risk_fraction <= 1, "gen.high_risk_fraction must lie in (0, 1]"),
            (0 < self.censored_fraction < 1, "gen.censored_fraction must lie in (0, 1)"),
            (self.time_scale > 0, "gen.time_scale must be positive"),
            (0 < self.rho <= 1, "gen.rho must lie in (0, 1]"),
            (self.seed >= 0, "gen.seed must be non-negative"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    def config_hash(self) -> str:
        return stable_hash(asdict(self))


def stable_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class GroundTruth:
    weights: dict
    bias: float
    censor_rate: float
    event_times: dict = field(default_factory=dict)
    censor_times: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def weight_vector(self, codes) -> np.ndarray:
        return np.array([self.weights[c] for c in codes])


def gen_ontology(config: GeneratorConfig) -> Ontology:
    """Perfect ``branching``-ary forest of ``depth`` levels under each of two roots."""
    width = len(str(config.branching - 1))
    parent = {}
    for root in ROOTS:
        parent[root] = ROOT
        frontier = [root]
        for _ in range(config.depth):
            nxt = []
            for node in frontier:
                for b in range(config.branching):
                    child = f"{node}{b:0{width}d}"
                    parent[child] = node
                    nxt.append(child)
            frontier = nxt
    return Ontology(parent, kinds=dict(ROOTS))


def _solve_censor_rate(rates: np.ndarray, target: float) -> float:
    """Rate c with mean_i c / (c + rate_i) == target (monotone in c; bisect in log space)."""
    lo, hi = np.log(rates.min()) - 20.0, np.log(rates.max()) + 20.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        c = np.exp(mid)
        if np.mean(c / (c + rates)) < target:
            lo = mid
        else:
            hi = mid
    return float(np.exp(0.5 * (lo + hi)))


def gen_cohort(config: GeneratorConfig, ontology: Ontology):
    """Return ``(cohort, ground_truth)``; fully determined by ``config``."""
    rng = np.random.default_rng(config.seed)
    leaves = ontology.sorted_leaves()
    groups = sorted({ontology.parent(c) for c in leaves})
    members = {g: [c for c in ontology.children(g) if ontology.is_leaf(c)] for g in groups}

    popularity = rng.gamma(1.0, size=len(groups))
    popularity /= popularity.sum()
    affinity = rng.uniform(*config.affinity, size=len(groups))

    weights = rng.normal(0.0, config.base_weight_sd, size=len(leaves))
    n_high = max(1, int(round(config.high_risk_fraction * len(leaves))))
    high = rng.choice(len(leaves), size=n_high, replace=False)
    signs = np.where(rng.random(n_high) < 0.7, 1.0, -1.0)
    weights[high] += signs * config.high_risk_scale * rng.uniform(0.5, 1.0, size=n_high)

    records = []
    lo_g, hi_g = config.groups_per_patient
    lo_c, hi_c = config.codes_per_visit
    for i in range(config.n_patients):
        n_groups = min(int(rng.integers(lo_g, hi_g + 1)), len(groups))
        chosen = rng.choice(len(groups), size=n_groups, replace=False, p=popularity)
        pool = []
        for g in sorted(chosen):
            kids = members[groups[g]]
            keep = [c for c in kids if rng.random() < affinity[g]]
            if not keep:
                keep = [kids[int(rng.integers(len(kids)))]]
            pool.extend(keep)
        visits = []
        for _ in range(config.visits):
            k = min(int(rng.integers(lo_c, hi_c + 1)), len(pool))
            codes = set(rng.choice(pool, size=k, replace=False).tolist())
            for _slot in range(k):
                if rng.random() < config.noise_rate:
                    codes.add(leaves[int(rng.integers(len(leaves)))])
            visits.append(sorted(codes))
        records.append(PatientRecord.from_lists(f"p{i:05d}", visits))

    vocab = Vocabulary(tuple(leaves))
    X = featurize_many(records, vocab, config.rho)
    risk = X @ weights
    bias = float(-np.log(config.time_scale) - risk.mean())
    rates = np.exp(risk + bias)
    censor_rate = _solve_censor_rate(rates, config.censored_fraction)
    event_t = rng.exponential(1.0 / rates)
    censor_t = rng.exponential(1.0 / censor_rate, size=config.n_patients)

    patients = []
    for rec, te, tc in zip(records, event_t, censor_t):
        observed = int(te <= tc)
        patients.append(Patient(rec, SurvivalLabel(float(min(te, tc)), observed)))
    truth = GroundTruth(
        weights={c: float(w) for c, w in zip(leaves, weights)},
        bias=bias,
        censor_rate=censor_rate,
        event_times={r.id: float(t) for r, t in zip(records, event_t)},
        censor_times={r.id: float(t) for r, t in zip(records, censor_t)},
    )
    return Cohort(tuple(patients), config.seed, config.config_hash()), truth


def split_cohort(cohort: Cohort, n_target: int, seed: int):
    """Seeded disjoint (train, target) partition; both keep the original patient order."""
    if not 0 <= n_target <= len(cohort):
        raise ValueError("n_target out of range")
    rng = np.random.default_rng([seed, 1])
    picked = set(rng.choice(len(cohort), size=n_target, replace=False).tolist())
    train = tuple(p for i, p in enumerate(cohort.patients) if i not in picked)
    target = tuple(p for i, p in enumerate(cohort.patients) if i in picked)
    return (Cohort(train, cohort.seed, cohort.config_hash),
            Cohort(target, cohort.seed, cohort.config_hash))
