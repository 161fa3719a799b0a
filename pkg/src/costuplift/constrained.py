"""Constrained ranking: quantile pooling with an annealed sigmoid fall-off
on top of the direct-ranking loss."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .data import ExperimentDataset
from .drm import (
    LinearScorer,
    TrainConfig,
    TrainingTrace,
    _arrays,
    init_params,
    objective,
    run_adam,
)
from .errors import ConfigError, ValidationError

TOP_QUANTILE = "top_quantile"
FIXED_COST = "fixed_cost"


@dataclass
class ConstraintSpec:
    """Which offset rule to use and how the fall-off temperature anneals.

    ``budget_measure`` selects what the fixed-cost rule accumulates:
    ``"score"`` sums the sorted scores themselves, ``"cost_estimate"`` sums
    a caller-supplied per-row cost estimate.
    """

    kind: str = TOP_QUANTILE
    q: Optional[float] = 40.0
    budget: Optional[float] = None
    start_temperature: float = 0.5
    temperature_increment: float = 0.1
    increment_every: int = 100
    budget_measure: str = "score"

    def validate(self):
        if self.kind == TOP_QUANTILE:
            if self.q is None or not 0 < self.q <= 100:
                raise ConfigError(f"top_quantile needs q in (0, 100], got {self.q!r}")
        elif self.kind == FIXED_COST:
            if self.budget is None or not self.budget > 0:
                raise ConfigError(f"fixed_cost needs a positive budget, got {self.budget!r}")
            if self.budget_measure not in ("score", "cost_estimate"):
                raise ConfigError(f"unknown budget_measure {self.budget_measure!r}")
        else:
            raise ConfigError(f"unknown constraint kind {self.kind!r}")
        if not self.start_temperature > 0 or self.temperature_increment < 0:
            raise ConfigError("start_temperature must be positive and the increment nonnegative")
        if not isinstance(self.increment_every, (int, np.integer)) or self.increment_every < 1:
            raise ConfigError(f"increment_every must be a positive integer, got {self.increment_every!r}")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "ConstraintSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown constraint keys: {sorted(unknown)}")
        spec = cls(**d)
        if spec.kind == FIXED_COST and "q" not in d:
            spec.q = None
        return spec.validate()


@dataclass
class PoolingState:
    offset: float
    temperature: float
    fall_off: np.ndarray
    pooled: np.ndarray


def _sort_desc(s):
    # descending, ties by original index
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or s.shape[0] == 0:
        raise ValidationError("offset rules need a nonempty 1-D score vector")
    order = np.argsort(-s, kind="stable")
    return s[order], order


def quantile_count(n: int, q: float) -> int:
    """``round_half_up(n * q / 100)`` clamped to ``[1, n]``."""
    return min(n, max(1, int(math.floor(n * q / 100.0 + 0.5))))


def quantile_offset(s, q: float) -> float:
    """Score of the ``n``-th highest row, ``n = round(N * q / 100)``."""
    if not 0 < q <= 100:
        raise ValidationError(f"q must lie in (0, 100], got {q}")
    ordered, _ = _sort_desc(s)
    return float(ordered[quantile_count(len(ordered), q) - 1])


def budget_offset(s, budget: float, measure=None) -> float:
    """Score of the last row before the running sum exceeds ``budget``.

    Rows are taken in descending score order; the running sum accumulates
    the sorted scores themselves, or ``measure`` (one value per row, in
    original order) when given.  Returns the top score if the first row
    already exceeds the budget and the lowest score if it never does.
    """
    if not budget > 0:
        raise ValidationError(f"budget must be positive, got {budget}")
    ordered, order = _sort_desc(s)
    if measure is None:
        acc = np.cumsum(ordered)
    else:
        measure = np.asarray(measure, dtype=float)
        if measure.shape != (len(ordered),):
            raise ValidationError("measure must have one value per score")
        acc = np.cumsum(measure[order])
    over = np.flatnonzero(acc > budget)
    if over.size == 0:
        return float(ordered[-1])
    return float(ordered[max(over[0] - 1, 0)])


def fall_off(s, offset: float, temperature: float) -> np.ndarray:
    """``sigmoid(temperature * (s - offset))``."""
    return 0.5 * (1.0 + np.tanh(0.5 * temperature * (np.asarray(s, dtype=float) - offset)))


def apply_pooling(s, offset: float, temperature: float):
    """Return ``(v, s * v)`` for the fall-off ``v`` around ``offset``."""
    if not temperature > 0:
        raise ValidationError(f"temperature must be positive, got {temperature}")
    v = fall_off(s, offset, temperature)
    return v, np.asarray(s, dtype=float) * v


def temperature_at(step: int, spec: ConstraintSpec) -> float:
    if step < 0:
        raise ValidationError(f"step must be nonnegative, got {step}")
    return spec.start_temperature + spec.temperature_increment * (step // spec.increment_every)


def compute_offset(s, spec: ConstraintSpec, cost_estimate=None) -> float:
    if spec.kind == TOP_QUANTILE:
        return quantile_offset(s, spec.q)
    measure = cost_estimate if spec.budget_measure == "cost_estimate" else None
    if spec.budget_measure == "cost_estimate" and measure is None:
        raise ConfigError("budget_measure='cost_estimate' needs a per-row cost estimate")
    return budget_offset(s, spec.budget, measure)


def pooling_state(bounded, spec: ConstraintSpec, step: int, cost_estimate=None) -> PoolingState:
    temp = temperature_at(step, spec)
    d = compute_offset(bounded, spec, cost_estimate)
    v, pooled = apply_pooling(bounded, d, temp)
    return PoolingState(d, temp, v, pooled)


def constrained_loss_and_grad(scorer: LinearScorer, X, treatment, gain, cost, offset, temperature,
                              config: TrainConfig = None):
    """Pooled ratio loss and its gradient with ``offset`` held fixed."""
    config = config or TrainConfig()
    X, t, g, c = _arrays(X, treatment, gain, cost)
    loss, grad, eff, _ = objective(scorer.params, X, t, g, c, config.l2_reg, config.denom_guard,
                                   pool=(offset, temperature))
    return loss, grad, eff


def train_constrained(ds: ExperimentDataset, config: TrainConfig = None, spec: ConstraintSpec = None,
                      cost_estimate=None):
    """Fit a ``LinearScorer`` with quantile pooling.

    Each iteration recomputes the offset from the current scores, treats it
    as a constant, pools the scores and applies the direct-ranking loss.
    The trace adds temperature, offset and the count of rows above the offset.
    """
    config = (config or TrainConfig()).validate()
    spec = (spec or ConstraintSpec()).validate()
    X, t, g, c = _arrays(ds.features, ds.treatment, ds.gain, ds.cost)
    theta = init_params(X.shape[1], config)
    trace = TrainingTrace()

    def step(k, th):
        s = np.tanh(X @ th[:-1] + th[-1])
        d = compute_offset(s, spec, cost_estimate)
        temp = temperature_at(k, spec)
        loss, grad, eff, _ = objective(th, X, t, g, c, config.l2_reg, config.denom_guard, pool=(d, temp))
        return loss, grad, (eff, d, temp, int(np.count_nonzero(s > d)))

    def record(k, loss, extras):
        eff, d, temp, active = extras
        trace.append(iteration=k, loss=loss, tau_bar_r=eff.tau_bar_r, tau_bar_c=eff.tau_bar_c,
                     temperature=temp, offset=d, active_count=active)

    theta = run_adam(theta, config, step, record)
    return LinearScorer.from_params(theta), trace
