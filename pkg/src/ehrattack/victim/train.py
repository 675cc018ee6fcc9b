"""Censored maximum-likelihood fitting of the reference victims by gradient descent."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DegenerateCohort, NonFiniteLoss
from ..metrics import PredictionSet, c_index
from ..records import Cohort
from .features import Vocabulary, featurize_many
from .models import DiscreteTimeHazardModel, ExponentialHazardModel


@dataclass(frozen=True)
class TrainingConfig:
    kind: str = "exponential"
    learning_rate: float = 0.5
    epochs: int = 400
    l2: float = 1e-3
    rho: float = 0.7
    intervals: int = 20
    horizon_factor: float = 1.5
    holdout_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("exponential", "discrete"):
            raise ValueError(f"victim.kind must be 'exponential' or 'discrete', got {self.kind!r}")
        if self.learning_rate <= 0 or self.epochs < 1 or self.l2 < 0:
            raise ValueError("victim.learning_rate/epochs/l2 out of range")
        if not 0 < self.rho <= 1:
            raise ValueError("victim.rho must lie in (0, 1]")
        if self.intervals < 2:
            raise ValueError("victim.intervals must be >= 2")
        if not 0 <= self.holdout_fraction < 1:
            raise ValueError("victim.holdout_fraction must lie in [0, 1)")


@dataclass
class TrainingReport:
    kind: str
    losses: list = field(default_factory=list)
    train_c_index: float = float("nan")
    holdout_c_index: float | None = None
    n_train: int = 0
    n_holdout: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


# -- exponential -------------------------------------------------------------

def exponential_loss_grad(params: np.ndarray, X: np.ndarray, time: np.ndarray,
                          event: np.ndarray, l2: float = 0.0):
    """Mean censored NLL  sum_i [lambda_i T_i - k_i log lambda_i] / n  and its gradient.

    ``params`` is ``[w..., b]``; the bias is not penalised.
    """
    w, b = params[:-1], params[-1]
    eta = X @ w + b
    lam_t = np.exp(eta) * time
    n = len(time)
    loss = (np.sum(lam_t) - np.sum(event * eta)) / n + 0.5 * l2 * np.dot(w, w)
    r = (lam_t - event) / n
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = np.sum(r)
    return float(loss), grad


# -- discrete time -----------------------------------------------------------

def interval_index(time: np.ndarray, boundaries: np.ndarray) -> np.ndarray:
    """0-based interval holding each time; times past the horizon fall in the last one."""
    idx = np.searchsorted(boundaries, time, side="right")
    return np.minimum(idx, len(boundaries) - 1)


def _softplus(z):
    return np.logaddexp(0.0, z)


def discrete_loss_grad(params: np.ndarray, X: np.ndarray, time: np.ndarray,
                       event: np.ndarray, boundaries: np.ndarray, l2: float = 0.0):
    """Mean discrete-time hazard NLL and gradient.

    Survived intervals contribute log(1 - h); the event interval of an observed
    patient contributes log h. A censored patient contributes only the intervals
    strictly before the one holding its censoring time.
    ``params`` packs ``W`` (K x V, row-major) followed by ``b`` (K).
    """
    n, v = X.shape
    k = len(boundaries)
    W = params[: k * v].reshape(k, v)
    b = params[k * v:]
    Z = X @ W.T + b
    j = interval_index(time, boundaries)
    cols = np.arange(k)[None, :]
    survived = cols < j[:, None]
    died = (cols == j[:, None]) & (event[:, None] == 1)
    loss = (np.sum(survived * _softplus(Z)) + np.sum(died * _softplus(-Z))) / n
    loss += 0.5 * l2 * np.sum(W * W)
    sig = 0.5 * (1.0 + np.tanh(0.5 * Z))
    G = (survived * sig + died * (sig - 1.0)) / n
    grad = np.concatenate([(G.T @ X + l2 * W).ravel(), G.sum(axis=0)])
    return float(loss), grad


# -- driver ------------------------------------------------------------------

def _split(cohort: Cohort, fraction: float, seed: int):
    n = len(cohort)
    n_hold = int(round(n * fraction))
    if n_hold == 0:
        return list(cohort.patients), []
    order = np.random.default_rng(seed).permutation(n)
    hold = sorted(order[:n_hold])
    hold_set = set(hold)
    train = [p for i, p in enumerate(cohort.patients) if i not in hold_set]
    return train, [cohort.patients[i] for i in hold]


def _gradient_descent(fun, params, lr, epochs, losses):
    for _ in range(epochs):
        loss, grad = fun(params)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise NonFiniteLoss(f"loss became non-finite after {len(losses)} epochs")
        losses.append(loss)
        params = params - lr * grad
    return params


def train_victim(cohort: Cohort, config: TrainingConfig = TrainingConfig(),
                 vocab: Vocabulary | None = None, holdout: Cohort | None = None):
    """Fit a reference victim on `cohort`.

    When `holdout` is not given, ``config.holdout_fraction`` of the cohort is
    set aside (seeded) for the held-out c-index. Returns ``(model, report)``.
    """
    if holdout is None:
        train, held = _split(cohort, config.holdout_fraction, config.seed)
    else:
        train, held = list(cohort.patients), list(holdout.patients)
    events = np.array([p.label.event for p in train], dtype=float)
    if events.sum() == 0 or events.sum() == len(events):
        raise DegenerateCohort("training needs both censored and observed patients")
    if vocab is None:
        vocab = Vocabulary(tuple(cohort.vocabulary()))
    X = featurize_many([p.record for p in train], vocab, config.rho)
    times = np.array([p.label.time for p in train])
    report = TrainingReport(kind=config.kind, n_train=len(train), n_holdout=len(held))

    if config.kind == "exponential":
        params = np.zeros(len(vocab) + 1)
        params[-1] = np.log(events.sum() / times.sum())
        params = _gradient_descent(
            lambda th: exponential_loss_grad(th, X, times, events, config.l2),
            params, config.learning_rate, config.epochs, report.losses)
        model = ExponentialHazardModel(vocab, config.rho, params[:-1].copy(), params[-1])
    else:
        model = DiscreteTimeHazardModel.uniform(
            vocab, config.horizon_factor * times.max(), config.intervals, rho=config.rho)
        k = model.n_intervals
        # start from the pooled per-interval hazard
        j = interval_index(times, model.boundaries)
        at_risk = np.array([np.sum(j >= i) for i in range(k)], dtype=float)
        died = np.array([np.sum((j == i) & (events == 1)) for i in range(k)], dtype=float)
        h0 = np.clip((died + 0.5) / (at_risk + 1.0), 1e-4, 1 - 1e-4)
        params = np.concatenate([np.zeros(k * len(vocab)), np.log(h0 / (1 - h0))])
        params = _gradient_descent(
            lambda th: discrete_loss_grad(th, X, times, events, model.boundaries, config.l2),
            params, config.learning_rate, config.epochs, report.losses)
        model.weights = params[: k * len(vocab)].reshape(k, len(vocab)).copy()
        model.biases = params[k * len(vocab):].copy()

    report.train_c_index = c_index(PredictionSet.from_patients(
        train, model.predict_from_features(X)))
    if held:
        Xh = featurize_many([p.record for p in held], vocab, config.rho)
        report.holdout_c_index = c_index(PredictionSet.from_patients(
            held, model.predict_from_features(Xh)))
    return model, report
