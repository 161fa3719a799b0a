"""Direct Ranking Model.

A linear scorer ``tanh(x @ w + b)`` is trained to minimize the ratio of
softmax-weighted cost effect to softmax-weighted gain effect, using
analytic gradients and full-batch Adam.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .data import ExperimentDataset, FeatureStats, apply_stats
from .errors import ConfigError, EvaluationError, ShapeError, TrainingError
from .optim import Adam


@dataclass(frozen=True, eq=False)
class LinearScorer:
    weights: np.ndarray
    bias: float
    feature_stats: Optional[FeatureStats] = None

    @property
    def d(self) -> int:
        return self.weights.shape[0]

    @property
    def params(self) -> np.ndarray:
        return np.append(self.weights, self.bias)

    @classmethod
    def from_params(cls, theta, feature_stats=None) -> "LinearScorer":
        theta = np.array(theta, dtype=float)
        return cls(theta[:-1], float(theta[-1]), feature_stats)

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "feature_stats": None if self.feature_stats is None else self.feature_stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "LinearScorer":
        fs = d.get("feature_stats")
        return cls(np.asarray(d["weights"], dtype=float), float(d["bias"]),
                   None if fs is None else FeatureStats.from_dict(fs))


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    iterations: int = 600
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    l2_reg: float = 0.0
    denom_guard: float = 1e-6
    seed: int = 0
    init_scale: float = 0.01
    standardize: bool = True

    def validate(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not isinstance(self.iterations, (int, np.integer)) or self.iterations < 0:
            raise ConfigError(f"iterations must be a nonnegative integer, got {self.iterations!r}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1 and self.adam_epsilon > 0):
            raise ConfigError("Adam betas must lie in [0, 1) and epsilon must be positive")
        if self.l2_reg < 0 or not self.denom_guard > 0 or self.init_scale < 0:
            raise ConfigError("l2_reg and init_scale must be nonnegative, denom_guard positive")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d).validate()


@dataclass
class PortfolioEffect:
    tau_bar_r: float
    tau_bar_c: float
    loss: float
    degenerate: bool = False


@dataclass
class TrainingTrace:
    """Per-iteration log; ``columns`` maps a name to a list of values."""

    columns: dict = field(default_factory=dict)

    def append(self, **values):
        for k, v in values.items():
            self.columns.setdefault(k, []).append(v)

    def __len__(self):
        first = next(iter(self.columns.values()), [])
        return len(first)

    def __getitem__(self, name):
        return np.asarray(self.columns[name])

    def to_csv(self, path):
        names = list(self.columns)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for row in zip(*(self.columns[n] for n in names)):
                w.writerow([v if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row])


def score(scorer: LinearScorer, X):
    """Raw ``X @ w + b`` and bounded ``tanh`` scores.

    If the scorer carries feature statistics, ``X`` is standardized first.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != scorer.d:
        raise ShapeError(f"scorer expects {scorer.d} features, got array of shape {X.shape}")
    if scorer.feature_stats is not None:
        X = apply_stats(X, scorer.feature_stats)
    raw = X @ scorer.weights + scorer.bias
    return raw, np.tanh(raw)


def _check_groups(treatment):
    n_t = int(np.count_nonzero(treatment))
    if n_t == 0 or n_t == len(treatment):
        raise EvaluationError(f"need treated and control rows; got {n_t} treated of {len(treatment)}")


def group_softmax(bounded, treatment) -> np.ndarray:
    """Softmax of the scores taken separately within treated and control rows."""
    t = np.ascontiguousarray(treatment, dtype=np.int8)
    _check_groups(t)
    p, _, _ = kernels.portfolio_forward(np.ascontiguousarray(bounded, dtype=float), t,
                                        np.zeros(len(t)), np.zeros(len(t)))
    return p


def guard_denominator(x: float, guard: float) -> float:
    """``sign(x) * max(|x|, guard)`` with sign(0) taken as +1."""
    return float(np.copysign(max(abs(x), guard), x if x != 0 else 1.0))


def portfolio_effect(p, treatment, gain, cost, denom_guard=1e-6, penalty=0.0) -> PortfolioEffect:
    p = np.asarray(p, dtype=float)
    t = np.asarray(treatment).astype(bool)
    gain = np.asarray(gain, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if not (p.shape == t.shape == gain.shape == cost.shape):
        raise ShapeError("p, treatment, gain and cost must have equal length")
    signed = np.where(t, p, -p)
    tr, tc = float(signed @ gain), float(signed @ cost)
    return PortfolioEffect(tr, tc, tc / guard_denominator(tr, denom_guard) + penalty, abs(tr) < denom_guard)


def objective(theta, X, treatment, gain, cost, l2_reg=0.0, denom_guard=1e-6, pool=None):
    """Loss and gradient w.r.t. ``theta = [w, b]``.

    ``pool`` is an optional ``(offset, temperature)`` pair; scores are then
    replaced by ``s * sigmoid(temperature * (s - offset))`` with the offset
    held constant.  Returns ``(loss, grad, effect, bounded_scores)``.
    """
    w, b = theta[:-1], theta[-1]
    s = np.tanh(X @ w + b)
    if pool is not None:
        offset, temp = pool
        v = 0.5 * (1.0 + np.tanh(0.5 * temp * (s - offset)))
        s_used = s * v
        dpool = v + s * temp * v * (1.0 - v)
    else:
        s_used = s
    p, tr, tc = kernels.portfolio_forward(s_used, treatment, gain, cost)
    den = guard_denominator(tr, denom_guard)
    penalty = l2_reg * float(w @ w)
    loss = tc / den + penalty
    g_c = 1.0 / den
    g_r = -tc / (den * den) if abs(tr) >= denom_guard else 0.0
    ds = kernels.portfolio_backward(p, treatment, gain, cost, g_r, g_c)
    if pool is not None:
        ds = ds * dpool
    dS = ds * (1.0 - s * s)
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ dS + 2.0 * l2_reg * w
    grad[-1] = dS.sum()
    return loss, grad, PortfolioEffect(tr, tc, loss, abs(tr) < denom_guard), s


def _arrays(X, treatment, gain, cost):
    X = np.ascontiguousarray(X, dtype=float)
    t = np.ascontiguousarray(treatment, dtype=np.int8)
    _check_groups(t)
    return X, t, np.ascontiguousarray(gain, dtype=float), np.ascontiguousarray(cost, dtype=float)


def drm_loss_and_grad(scorer: LinearScorer, X, treatment, gain, cost, config: TrainConfig = None):
    """Ratio loss ``tau_bar_c / tau_bar_r + l2 * |w|^2`` and its gradient.

    ``X`` is used as given (no standardization).  Returns
    ``(loss, grad, effect)`` with ``grad`` of length ``d + 1``.
    """
    config = config or TrainConfig()
    X, t, g, c = _arrays(X, treatment, gain, cost)
    loss, grad, eff, _ = objective(scorer.params, X, t, g, c, config.l2_reg, config.denom_guard)
    return loss, grad, eff


def init_params(d: int, config: TrainConfig) -> np.ndarray:
    rng = np.random.default_rng(config.seed)
    return rng.uniform(-config.init_scale, config.init_scale, d + 1)


def run_adam(theta, config, step_fn, record_fn):
    """Full-batch Adam loop shared by the ranking models.

    ``step_fn(k, theta)`` returns ``(loss, grad, extras)``; ``record_fn(k,
    loss, extras)`` logs the iteration.  Raises ``TrainingError`` on the
    first non-finite loss or gradient.
    """
    opt = Adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon)
    for k in range(config.iterations):
        loss, grad, extras = step_fn(k, theta)
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            raise TrainingError(f"non-finite loss or gradient at iteration {k}", k, theta.copy())
        record_fn(k, loss, extras)
        opt.step(theta, grad)
        if not np.all(np.isfinite(theta)):
            raise TrainingError(f"non-finite parameters after iteration {k}", k, None)
    return theta


def train_drm(ds: ExperimentDataset, config: TrainConfig = None):
    """Fit a ``LinearScorer`` on ``ds`` as given (callers standardize).

    Returns ``(scorer, trace)``; the trace has one row per iteration with the
    loss and both weighted effects evaluated before that iteration's update.
    """
    config = (config or TrainConfig()).validate()
    X, t, g, c = _arrays(ds.features, ds.treatment, ds.gain, ds.cost)
    theta = init_params(X.shape[1], config)
    trace = TrainingTrace()

    def step(k, th):
        loss, grad, eff, _ = objective(th, X, t, g, c, config.l2_reg, config.denom_guard)
        return loss, grad, eff

    def record(k, loss, eff):
        trace.append(iteration=k, loss=loss, tau_bar_r=eff.tau_bar_r, tau_bar_c=eff.tau_bar_c)

    theta = run_adam(theta, config, step, record)
    return LinearScorer.from_params(theta), trace
