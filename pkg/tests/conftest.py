"""Shared fixtures, stub victims and the session-wide attack-result registry.

Every AttackResult constructed during the session is recorded, together with
the AttackContext of the attack that built it, so the acceptance module
(ordered last) can check similarity safety, monotonicity and trace replay over
all attacks the suite ran.
"""
from __future__ import annotations

import sys

import pytest

from ehrattack.attack import AttackContext, greedy as greedy_mod
from ehrattack.cohortgen import GeneratorConfig, gen_cohort, gen_ontology, split_cohort
from ehrattack.ontology import Ontology, build_cooccurrence
from ehrattack.records import Cohort, Patient, PatientRecord, SurvivalLabel
from ehrattack.similarity import EncoderConfig, OntologyHashEncoder
from ehrattack.victim import TrainingConfig, Vocabulary, train_victim

ATTACK_RESULTS: list = []

_original_init = greedy_mod.AttackResult.__init__


def _recording_init(self, *args, **kwargs):
    _original_init(self, *args, **kwargs)
    # both attack functions hold their AttackContext in a local named `context`
    ATTACK_RESULTS.append((self, sys._getframe(1).f_locals.get("context")))


greedy_mod.AttackResult.__init__ = _recording_init


def pytest_collection_modifyitems(config, items):
    # the acceptance module inspects results produced by every other test
    items.sort(key=lambda item: item.nodeid.startswith("tests/test_acceptance.py"))


_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    n = marker.args[0]
    ok = report.passed and _CRITERIA.get(n, (True,))[0]
    _CRITERIA[n] = (ok, marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, title = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}")


# -- stub victims ------------------------------------------------------------

class WeightStub:
    """Transparent victim: F(V) = base - sum of code weights over all occurrences."""

    def __init__(self, weights: dict, base: float = 10.0):
        self.weights = dict(weights)
        self.base = base
        self.calls = 0

    def predict_time(self, record: PatientRecord) -> float:
        self.calls += 1
        return self.base - sum(self.weights.get(c, 0.0) for _, c in record.occurrences())


class OpaqueVictim:
    """Black box exposing nothing but predict_time."""

    __slots__ = ("_f",)

    def __init__(self, weights: dict):
        def f(record):
            s = sum(weights.get(c, 0.0) * (0.8 ** (record.n_visits - 1 - n))
                    for n, c in record.occurrences())
            return 20.0 / (1.0 + 2.0 ** s)
        object.__setattr__(self, "_f", f)

    def predict_time(self, record: PatientRecord) -> float:
        return self._f(record)


def make_context(ontology, cohort, p=0.75, encoder_config=EncoderConfig()):
    return AttackContext(ontology, build_cooccurrence(cohort), OntologyHashEncoder(
        ontology, encoder_config), p)


def rec(pid, *visits):
    return PatientRecord.from_lists(pid, [list(v) for v in visits])


def patient(pid, time, event, *visits):
    return Patient(rec(pid, *visits), SurvivalLabel(time, event))


# -- toy worlds --------------------------------------------------------------

@pytest.fixture
def xyz_ontology():
    return Ontology({"P": "ROOT", "x": "P", "y": "P", "z": "P"})


@pytest.fixture
def xyz_world(xyz_ontology):
    record = rec("s1", ["x", "y", "z"])
    cohort = Cohort((Patient(record, SurvivalLabel(1.0, 1)),))
    context = make_context(xyz_ontology, cohort)
    victim = WeightStub({"x": 2.0, "y": 1.0, "z": 0.5})
    return record, victim, context


@pytest.fixture(scope="session")
def small_ontology():
    return gen_ontology(GeneratorConfig(branching=3, depth=2))


SMALL_GEN = GeneratorConfig(n_patients=500, n_target=80, seed=7)


@pytest.fixture(scope="session")
def small_world():
    """A 500-patient generated cohort with a trained exponential victim."""
    ontology = gen_ontology(SMALL_GEN)
    cohort, truth = gen_cohort(SMALL_GEN, ontology)
    train, target = split_cohort(cohort, SMALL_GEN.n_target, SMALL_GEN.seed)
    vocab = Vocabulary(tuple(ontology.sorted_leaves()))
    model, report = train_victim(train, TrainingConfig(seed=SMALL_GEN.seed), vocab=vocab)
    context = make_context(ontology, train)
    return {"ontology": ontology, "cohort": cohort, "truth": truth, "train": train,
            "target": target, "victim": model, "report": report, "context": context}
