import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehrattack.cohortgen import GeneratorConfig, gen_cohort, gen_ontology, split_cohort
from ehrattack.errors import DegenerateCohort, ParseError, UnknownCode, UntrainedModel
from ehrattack.protocols import SurvivalModel
from ehrattack.records import Cohort, Patient, SurvivalLabel
from ehrattack.victim import (DiscreteTimeHazardModel, ExponentialHazardModel, TrainingConfig,
                              Vocabulary, featurize, load_model, model_from_dict,
                              model_to_dict, save_model, train_victim)
from ehrattack.victim.train import discrete_loss_grad, exponential_loss_grad, interval_index

from conftest import rec

VOCAB = Vocabulary(("a", "b", "c"))


def test_single_visit_single_code_is_indicator():
    assert featurize(rec("r", ["b"]), VOCAB, 0.3).tolist() == [0.0, 1.0, 0.0]


def test_recency_weighting():
    assert featurize(rec("r", ["a"], ["a"]), VOCAB, 0.5)[0] == 1.5


def test_code_order_within_visit_is_irrelevant():
    x1 = featurize(rec("r", ["a", "b"], ["c"]), VOCAB)
    x2 = featurize(rec("r", ["b", "a"], ["c"]), VOCAB)
    assert np.array_equal(x1, x2)


def test_unknown_code_in_featurize():
    with pytest.raises(UnknownCode):
        featurize(rec("r", ["zz"]), VOCAB)


def test_zero_exponential_predicts_one():
    m = ExponentialHazardModel(VOCAB, weights=np.zeros(3), bias=0.0)
    assert m.predict_time(rec("r", ["a"])) == 1.0


def test_half_hazards_discrete_predicts_seven_eighths():
    m = DiscreteTimeHazardModel(VOCAB, [1.0, 2.0, 3.0], weights=np.zeros((3, 3)),
                                biases=np.zeros(3))
    assert m.predict_time(rec("r", ["a", "c"])) == pytest.approx(0.875, abs=1e-15)


def test_positive_weight_code_shortens_exponential_prediction():
    m = ExponentialHazardModel(VOCAB, weights=np.array([0.0, 0.3, -0.1]), bias=0.2)
    assert m.predict_time(rec("r", ["a", "b"])) < m.predict_time(rec("r", ["a"]))


def test_models_satisfy_the_victim_protocol():
    assert isinstance(ExponentialHazardModel(VOCAB, weights=np.zeros(3), bias=0.0),
                      SurvivalModel)
    assert isinstance(DiscreteTimeHazardModel.uniform(VOCAB, 3.0, 3), SurvivalModel)


def test_untrained_models_refuse_to_predict():
    with pytest.raises(UntrainedModel):
        ExponentialHazardModel(VOCAB).predict_time(rec("r", ["a"]))
    with pytest.raises(UntrainedModel):
        DiscreteTimeHazardModel.uniform(VOCAB, 3.0, 3).predict_time(rec("r", ["a"]))


def test_exponential_survival_function():
    m = ExponentialHazardModel(VOCAB, weights=np.zeros(3), bias=math.log(2.0))
    assert m.survival_function(rec("r", ["a"]), 1.5) == pytest.approx(math.exp(-3.0))


@settings(max_examples=50)
@given(st.lists(st.floats(-3, 3), min_size=12, max_size=12),
       st.lists(st.floats(0, 6), min_size=5, max_size=5))
def test_discrete_survival_is_non_increasing_and_bounded(params, ts):
    W = np.array(params[:9]).reshape(3, 3)
    m = DiscreteTimeHazardModel(VOCAB, [1.0, 2.0, 3.0], weights=W, biases=np.array(params[9:]))
    r = rec("r", ["a"], ["b", "c"])
    values = [m.survival_function(r, t) for t in sorted(ts)]
    assert all(0.0 <= s <= 1.0 for s in values)
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_prediction_is_pure():
    rng = np.random.default_rng(0)
    m = DiscreteTimeHazardModel(VOCAB, [1.0, 2.0], weights=rng.normal(size=(2, 3)),
                                biases=rng.normal(size=2))
    r = rec("r", ["a"], ["c"])
    assert m.predict_time(r) == m.predict_time(r)


# -- likelihood oracles and gradients ----------------------------------------

def _toy_data(seed=0, n=25, v=4):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 2, size=(n, v))
    time = rng.exponential(1.0, size=n)
    event = (rng.random(n) < 0.4).astype(float)
    return X, time, event


def test_exponential_loss_matches_direct_likelihood():
    X, t, k = _toy_data()
    params = np.array([0.1, -0.2, 0.05, 0.3, -0.4])
    nll = 0.0
    for i in range(len(t)):
        lam = math.exp(X[i] @ params[:-1] + params[-1])
        nll -= k[i] * math.log(lam) - lam * t[i]
    loss, _ = exponential_loss_grad(params, X, t, k, l2=0.0)
    assert loss == pytest.approx(nll / len(t), rel=1e-12)


def test_discrete_loss_matches_direct_likelihood():
    X, t, k = _toy_data(1)
    bounds = np.array([0.5, 1.0, 2.0, 4.0])
    rng = np.random.default_rng(2)
    params = rng.normal(scale=0.3, size=4 * 4 + 4)
    W, b = params[:16].reshape(4, 4), params[16:]
    nll = 0.0
    for i in range(len(t)):
        h = 1 / (1 + np.exp(-(W @ X[i] + b)))
        j = min(int(np.searchsorted(bounds, t[i], side="right")), 3)
        nll -= sum(math.log(1 - h[q]) for q in range(j))
        if k[i] == 1:
            nll -= math.log(h[j])
    loss, _ = discrete_loss_grad(params, X, t, k, bounds, l2=0.0)
    assert loss == pytest.approx(nll / len(t), rel=1e-12)


def _fd_check(fun, params, picks, h=1e-6):
    _, grad = fun(params)
    for i in picks:
        up, down = params.copy(), params.copy()
        up[i] += h
        down[i] -= h
        fd = (fun(up)[0] - fun(down)[0]) / (2 * h)
        assert abs(fd - grad[i]) <= 1e-4 * max(abs(fd), abs(grad[i]), 1e-8), (i, fd, grad[i])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_exponential_gradient_finite_differences(seed):
    X, t, k = _toy_data(seed)
    rng = np.random.default_rng(seed + 10)
    params = rng.normal(scale=0.3, size=X.shape[1] + 1)
    picks = rng.choice(len(params), size=5, replace=False)
    _fd_check(lambda p: exponential_loss_grad(p, X, t, k, l2=0.01), params, picks)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_discrete_gradient_finite_differences(seed):
    X, t, k = _toy_data(seed)
    bounds = np.array([0.5, 1.0, 2.0])
    rng = np.random.default_rng(seed + 20)
    params = rng.normal(scale=0.3, size=3 * X.shape[1] + 3)
    picks = rng.choice(len(params), size=5, replace=False)
    _fd_check(lambda p: discrete_loss_grad(p, X, t, k, bounds, l2=0.01), params, picks)


def test_interval_index_clamps_to_last_interval():
    assert interval_index(np.array([0.0, 0.99, 1.0, 2.5, 99.0]),
                          np.array([1.0, 2.0, 3.0])).tolist() == [0, 0, 1, 2, 2]


# -- training ----------------------------------------------------------------

@pytest.fixture(scope="module")
def trained_default():
    cfg = GeneratorConfig(seed=11)
    ont = gen_ontology(cfg)
    cohort, truth = gen_cohort(cfg, ont)
    train, target = split_cohort(cohort, cfg.n_target, cfg.seed)
    vocab = Vocabulary(tuple(ont.sorted_leaves()))
    model, report = train_victim(train, TrainingConfig(seed=11), vocab=vocab)
    return model, report, truth


def test_loss_is_non_increasing(trained_default):
    losses = trained_default[1].losses
    assert len(losses) == 400
    assert all(b <= a + 1e-6 for a, b in zip(losses[1:], losses[2:]))


def test_learned_signs_agree_with_ground_truth(trained_default):
    model, _, truth = trained_default
    top = sorted(truth.weights, key=lambda c: -abs(truth.weights[c]))[:10]
    agree = sum(1 for c in top
                if np.sign(model.weights[model.vocab.index(c)]) == np.sign(truth.weights[c]))
    assert agree >= 8


def test_holdout_c_index_on_default_benchmark(trained_default):
    assert trained_default[1].holdout_c_index >= 0.65


def test_discrete_victim_trains(small_world):
    vocab = small_world["victim"].vocab
    model, report = train_victim(small_world["train"],
                                 TrainingConfig(kind="discrete", epochs=150), vocab=vocab)
    assert model.n_intervals == 20
    assert report.losses[-1] < report.losses[0]
    assert report.holdout_c_index > 0.6
    horizon = 1.5 * max(p.label.time for p in small_world["train"])
    assert model.boundaries[-1] <= horizon + 1e-9


def test_all_censored_cohort_is_degenerate():
    cohort = Cohort(tuple(Patient(rec(f"p{i}", ["a"]), SurvivalLabel(1.0 + i, 0))
                          for i in range(5)))
    with pytest.raises(DegenerateCohort):
        train_victim(cohort, TrainingConfig(holdout_fraction=0.0))


def test_training_is_deterministic(small_world):
    vocab = small_world["victim"].vocab
    a, ra = train_victim(small_world["train"], TrainingConfig(epochs=30), vocab=vocab)
    b, rb = train_victim(small_world["train"], TrainingConfig(epochs=30), vocab=vocab)
    assert np.array_equal(a.weights, b.weights) and ra.losses == rb.losses


@pytest.mark.parametrize("kind", ["exponential", "discrete"])
def test_model_file_round_trip(tmp_path, small_world, kind):
    vocab = small_world["victim"].vocab
    model, _ = train_victim(small_world["train"], TrainingConfig(kind=kind, epochs=5),
                            vocab=vocab)
    save_model(model, tmp_path / "m.json", extra={"note": 1})
    back = load_model(tmp_path / "m.json")
    for p in list(small_world["target"])[:20]:
        assert back.predict_time(p.record) == model.predict_time(p.record)
    assert model_to_dict(back) == model_to_dict(model)


def test_malformed_model_dict():
    with pytest.raises(ParseError):
        model_from_dict({"kind": "exponential"})
    with pytest.raises(ParseError):
        model_from_dict({"kind": "weibull", "vocab": [], "featurizer": {"rho": 0.7}})
