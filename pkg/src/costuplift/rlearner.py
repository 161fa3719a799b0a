"""R-learner (quasi-oracle) effect estimation and the Duality R-learner.

The Duality R-learner folds gain and cost into one outcome
``gain - lambda * cost`` and fits a single effect model on it; its
prediction is the effectiveness score.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import DatasetSplit, ExperimentDataset
from .errors import CostUpliftError, EvaluationError, SelectionError, ValidationError
from .evaluation import evaluate_scores
from .regression import RidgeModel, fit_ridge

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0)


@dataclass(frozen=True, eq=False)
class RLearnerModel:
    mean_model: RidgeModel
    propensity: float
    tau_model: RidgeModel

    def predict_tau(self, X) -> np.ndarray:
        return self.tau_model.predict(X)

    def to_dict(self) -> dict:
        return {
            "mean_model": self.mean_model.to_dict(),
            "propensity": self.propensity,
            "tau_model": self.tau_model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "RLearnerModel":
        return cls(RidgeModel.from_dict(d["mean_model"]), float(d["propensity"]),
                   RidgeModel.from_dict(d["tau_model"]))


MEAN_STRATEGIES = ("pooled", "arms")


def fit_mean_model(ds: ExperimentDataset, y, reg_weight: float = 0.0, strategy: str = "pooled") -> RidgeModel:
    """Estimate ``m(x) = E[y | x]``.

    ``"pooled"`` regresses ``y`` on the features over all rows.  ``"arms"``
    fits one regression per treatment arm and mixes them with the treated
    fraction, ``e * m1(x) + (1 - e) * m0(x)``; with linear arms this cannot
    absorb any of the ``(t - e) * tau(x)`` term in-sample.
    """
    if strategy == "pooled":
        return fit_ridge(ds.features, y, reg_weight=reg_weight)
    if strategy != "arms":
        raise ValidationError(f"unknown mean strategy {strategy!r}; expected one of {MEAN_STRATEGIES}")
    t = ds.treatment.astype(bool)
    e = ds.treated_fraction
    m1 = fit_ridge(ds.features[t], y[t], reg_weight=reg_weight)
    m0 = fit_ridge(ds.features[~t], y[~t], reg_weight=reg_weight)
    return RidgeModel(e * m1.weights + (1 - e) * m0.weights, e * m1.intercept + (1 - e) * m0.intercept,
                      float(reg_weight), m1.singular or m0.singular)


def fit_rlearner(ds: ExperimentDataset, reg_weight: float = 0.0, outcome=None,
                 mean_strategy: str = "pooled") -> RLearnerModel:
    """Two-step quasi-oracle fit with constant propensity.

    Step one estimates the outcome mean ``m`` (see ``fit_mean_model``) and
    sets the propensity to the treated fraction ``e``.  Step two fits
    ``tau`` by weighted least squares on ``(y - m(x)) / (t - e)`` with
    weights ``(t - e)**2``, which minimizes
    ``sum((y - m(x)) - (t - e) * tau(x))**2``.

    ``outcome`` defaults to the gain column.
    """
    y = ds.gain if outcome is None else np.asarray(outcome, dtype=float)
    if y.shape != (ds.n,):
        raise ValidationError(f"outcome has shape {y.shape}, expected ({ds.n},)")
    e = ds.treated_fraction
    if not 0.0 < e < 1.0:
        raise EvaluationError(f"propensity {e} leaves no counterfactual group")
    mean_model = fit_mean_model(ds, y, reg_weight, mean_strategy)
    resid = y - mean_model.predict(ds.features)
    u = ds.treatment - e
    tau_model = fit_ridge(ds.features, resid / u, sample_weights=u * u, reg_weight=reg_weight)
    return RLearnerModel(mean_model, float(e), tau_model)


def predict_tau(model: RLearnerModel, X) -> np.ndarray:
    return model.tau_model.predict(X)


@dataclass(frozen=True, eq=False)
class DualityModel:
    lambda_: float
    rlearner: RLearnerModel
    validation_aucc: dict = field(default_factory=dict)

    def score(self, X) -> np.ndarray:
        return self.rlearner.predict_tau(X)

    def to_dict(self) -> dict:
        d = {"lambda": self.lambda_, **self.rlearner.to_dict()}
        if self.validation_aucc:
            d["validation_aucc"] = {repr(k): v for k, v in self.validation_aucc.items()}
        return d

    @classmethod
    def from_dict(cls, d) -> "DualityModel":
        vals = {float(k): v for k, v in d.get("validation_aucc", {}).items()}
        return cls(float(d["lambda"]), RLearnerModel.from_dict(d), vals)


def fit_duality(ds: ExperimentDataset, lambda_: float, reg_weight: float = 0.0,
                mean_strategy: str = "pooled") -> DualityModel:
    if lambda_ < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lambda_}")
    combined = ds.gain - lambda_ * ds.cost
    return DualityModel(float(lambda_), fit_rlearner(ds, reg_weight, outcome=combined,
                                                     mean_strategy=mean_strategy))


def select_lambda(ds: ExperimentDataset, split: DatasetSplit, grid=DEFAULT_LAMBDA_GRID,
                  reg_weight: float = 0.0, mean_strategy: str = "pooled"):
    """Fit one Duality model per grid value on the training rows and keep
    the one with the best validation AUCC (ties go to the smaller lambda).

    Returns ``(lambda, model)``; ``model.validation_aucc`` holds every
    candidate's score (None for candidates that failed).
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValidationError("lambda grid is empty")
    train, val = ds.subset(split.train), ds.subset(split.validation)
    best, scores = None, {}
    for lam in grid:
        try:
            model = fit_duality(train, lam, reg_weight, mean_strategy)
            a = evaluate_scores(model.score(val.features), val.treatment, val.gain, val.cost).aucc
        except CostUpliftError as exc:
            logger.warning("lambda=%g failed: %s", lam, exc)
            scores[lam] = None
            continue
        scores[lam] = a
        if best is None or a > best[1]:
            best = (lam, a, model)
    if best is None:
        raise SelectionError("every lambda candidate failed evaluation")
    lam, _, model = best
    return lam, DualityModel(lam, model.rlearner, scores)


# ---------------------------------------------------------------------------
# relaxed knapsack subproblem
# ---------------------------------------------------------------------------

@dataclass
class DualityDecision:
    z: np.ndarray
    spend: float
    objective: float
    scores: Optional[np.ndarray] = None


def solve_z(tau_r, tau_c, lambda_: float) -> DualityDecision:
    """Maximize ``sum z * (tau_r - lambda * tau_c)`` over ``z`` in [0, 1]^N.

    Picks ``z = 1`` wherever the score is >= 0.
    """
    tau_r = np.asarray(tau_r, dtype=float)
    tau_c = np.asarray(tau_c, dtype=float)
    if tau_r.shape != tau_c.shape:
        raise ValidationError("tau_r and tau_c must have equal length")
    s = tau_r - lambda_ * tau_c
    z = (s >= 0).astype(float)
    return DualityDecision(z, float(tau_c @ z), float(tau_r @ z), s)


def update_lambda(lambda_: float, spend: float, budget: float, alpha: float) -> float:
    """``max(0, lambda + alpha * (budget - spend))``."""
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    return max(0.0, lambda_ + alpha * (budget - spend))


def dual_ascent(tau_r, tau_c, budget: float, alpha: float, lambda0: float = 0.0, iterations: int = 200):
    """Alternate ``solve_z`` with a projected subgradient step on lambda.

    The multiplier rises while spend exceeds the budget and falls otherwise,
    which is the ascent direction of the dual function.  Returns the final
    decision and the list of ``(lambda, spend)`` pairs visited.
    """
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    lam, trace = float(lambda0), []
    for _ in range(iterations):
        dec = solve_z(tau_r, tau_c, lam)
        trace.append((lam, dec.spend))
        lam = max(0.0, lam + alpha * (dec.spend - budget))
    return solve_z(tau_r, tau_c, lam), trace
