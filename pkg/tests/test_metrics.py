from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ehrattack.errors import NoObservedPatients, NoPermissiblePairs
from ehrattack.metrics import (PairClass, PredictionSet, c_index, c_index_formula,
                               classify_pair, mae, metric_report, pair_tally)


def ps(time, event, pred):
    return PredictionSet(np.array(time, float), np.array(event), np.array(pred, float))


def test_perfect_predictions():
    t = [1.0, 2.0, 3.5, 7.0]
    assert c_index(ps(t, [1] * 4, t)) == 1.0


def test_reversed_pair():
    assert c_index(ps([1, 2], [1, 1], [2, 1])) == 0.0


def test_tied_predictions():
    assert c_index(ps([1, 2], [1, 1], [5, 5])) == 0.5


def test_four_patient_worked_example():
    # A(T=2,k=1,P=3) B(T=3,k=0,P=2) C(T=5,k=1,P=5) D(T=4,k=0,P=6)
    preds = ps([2, 3, 5, 4], [1, 0, 1, 0], [3, 2, 5, 6])
    tally = pair_tally(preds)
    assert (tally.permissible, tally.concordant, tally.discordant, tally.tied) == (3, 2, 1, 0)
    assert c_index(preds) == pytest.approx(2 / 3, abs=1e-15)
    assert c_index_formula(preds) == pytest.approx(2 / 3, abs=1e-15)


def test_pair_rules():
    assert classify_pair(1, 0, 5, 2, 0, 1) is PairClass.EXCLUDED
    assert classify_pair(1, 0, 5, 2, 1, 1) is PairClass.EXCLUDED
    assert classify_pair(1, 1, 5, 2, 0, 6) is PairClass.CONCORDANT
    assert classify_pair(2, 1, 5, 2, 1, 6) is PairClass.EXCLUDED
    assert classify_pair(2, 1, 6, 1, 1, 5) is PairClass.CONCORDANT
    assert classify_pair(1, 1, 5, 2, 1, 5) is PairClass.TIED


def test_no_permissible_pairs():
    with pytest.raises(NoPermissiblePairs):
        c_index(ps([1, 2], [0, 0], [1, 2]))
    with pytest.raises(NoPermissiblePairs):
        c_index_formula(ps([1, 2], [0, 0], [1, 2]))


def test_mae_exact_predictions():
    assert mae(ps([1, 2], [1, 1], [1, 2])) == 0.0


def test_mae_hand_case():
    assert mae(ps([2, 4, 9], [1, 1, 0], [3, 2, 100])) == 1.5


def test_mae_needs_observed():
    with pytest.raises(NoObservedPatients):
        mae(ps([2], [0], [3]))


def test_prediction_set_validation():
    with pytest.raises(ValueError):
        ps([1, 2], [1], [1, 2])
    with pytest.raises(ValueError):
        ps([1], [2], [1])
    with pytest.raises(ValueError):
        ps([-1], [1], [1])


def test_metric_report_shape():
    rep = metric_report(ps([2, 3, 5, 4], [1, 0, 1, 0], [3, 2, 5, 6]))
    assert rep["pairs"] == {"permissible": 3, "concordant": 2, "discordant": 1, "tied": 0}
    assert set(rep) >= {"c_index", "mae", "pairs"}


# -- properties --------------------------------------------------------------

@st.composite
def prediction_sets(draw, min_size=2, max_size=30, distinct_pred=False):
    n = draw(st.integers(min_size, max_size))
    # small integer grids make ties in both true and predicted times common
    time = draw(st.lists(st.integers(0, 8), min_size=n, max_size=n))
    event = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    if distinct_pred:
        pred = draw(st.lists(st.integers(0, 10_000), min_size=n, max_size=n, unique=True))
    else:
        pred = draw(st.lists(st.integers(0, 8), min_size=n, max_size=n))
    return ps(time, event, pred)


def _ratio(preds):
    """Exact rational c-index by literal enumeration of all ordered pairs."""
    t, k, p = preds.time, preds.event, preds.predicted
    num, den = Fraction(0), 0
    for i in range(len(t)):
        for j in range(len(t)):
            if t[i] < t[j] and k[i] == 1:
                den += 1
                num += 1 if p[i] < p[j] else (Fraction(1, 2) if p[i] == p[j] else 0)
    return None if den == 0 else num / den


@given(prediction_sets())
def test_rule_based_equals_indicator_sum(preds):
    expected = _ratio(preds)
    if expected is None:
        with pytest.raises(NoPermissiblePairs):
            c_index(preds)
        return
    assert c_index(preds) == c_index_formula(preds) == float(expected)


@given(prediction_sets())
def test_vectorised_tally_matches_scalar_rules(preds):
    counts = {c: 0 for c in PairClass}
    n = len(preds)
    for i in range(n):
        for j in range(i + 1, n):
            counts[classify_pair(preds.time[i], preds.event[i], preds.predicted[i],
                                 preds.time[j], preds.event[j], preds.predicted[j])] += 1
    tally = pair_tally(preds)
    assert tally.concordant == counts[PairClass.CONCORDANT]
    assert tally.discordant == counts[PairClass.DISCORDANT]
    assert tally.tied == counts[PairClass.TIED]
    assert tally.permissible == n * (n - 1) // 2 - counts[PairClass.EXCLUDED]


@given(prediction_sets(distinct_pred=True))
def test_negated_predictions_complement(preds):
    obs = PredictionSet(preds.time, np.ones(len(preds), dtype=int), preds.predicted)
    if len(set(obs.time.tolist())) < 2:
        return
    neg = PredictionSet(obs.time, obs.event, -obs.predicted)
    assert c_index(neg) == pytest.approx(1 - c_index(obs), abs=1e-12)


@given(prediction_sets(), st.randoms(use_true_random=False))
def test_permutation_invariance(preds, rnd):
    order = list(range(len(preds)))
    rnd.shuffle(order)
    shuffled = PredictionSet(preds.time[order], preds.event[order], preds.predicted[order])
    assert metric_report(shuffled) == metric_report(preds)


@given(prediction_sets(), st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8)), max_size=5))
def test_censored_patients_never_change_mae(preds, extra):
    if not (preds.event == 1).any():
        return
    more = PredictionSet(np.concatenate([preds.time, [t for t, _ in extra]]),
                         np.concatenate([preds.event, [0] * len(extra)]).astype(int),
                         np.concatenate([preds.predicted, [p for _, p in extra]]))
    assert mae(more) == mae(preds)
