"""Uniform fit/score/serialize wrapper over the four model kinds."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constrained import ConstraintSpec, train_constrained
from .data import DatasetSplit, ExperimentDataset, standardize
from .drm import LinearScorer, TrainConfig, TrainingTrace, score, train_drm
from .errors import CostUpliftError, ConfigError
from .evaluation import evaluate_scores
from .rlearner import DEFAULT_LAMBDA_GRID, DualityModel, RLearnerModel, fit_rlearner, select_lambda

MODEL_KINDS = ("rlearner_gain", "duality", "drm", "constrained")


@dataclass(eq=False)
class FittedModel:
    kind: str
    model: object
    info: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        if isinstance(self.model, LinearScorer):
            return self.model.d
        if isinstance(self.model, DualityModel):
            return self.model.rlearner.tau_model.d
        return self.model.tau_model.d

    def score(self, X) -> np.ndarray:
        """Ranking scores; higher means treat first."""
        if isinstance(self.model, LinearScorer):
            return score(self.model, X)[0]
        if isinstance(self.model, DualityModel):
            return self.model.score(X)
        return self.model.predict_tau(X)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "model": self.model.to_dict(), "info": self.info}

    @classmethod
    def from_dict(cls, d) -> "FittedModel":
        kind = d.get("kind")
        loaders = {
            "rlearner_gain": RLearnerModel.from_dict,
            "duality": DualityModel.from_dict,
            "drm": LinearScorer.from_dict,
            "constrained": LinearScorer.from_dict,
        }
        if kind not in loaders:
            raise ConfigError(f"unknown model kind {kind!r}")
        return cls(kind, loaders[kind](d["model"]), dict(d.get("info", {})))


def _validation_aucc(model: FittedModel, val: ExperimentDataset):
    if val.n == 0:
        return None
    try:
        return evaluate_scores(model.score(val.features), val.treatment, val.gain, val.cost).aucc
    except CostUpliftError:
        return None


def fit_model(kind: str, ds: ExperimentDataset, split: DatasetSplit, config: TrainConfig = None,
              constraint: ConstraintSpec = None, lambda_grid=DEFAULT_LAMBDA_GRID,
              reg_weight: float = 0.0, mean_strategy: str = "pooled"):
    """Train ``kind`` on the split's training rows.

    Returns ``(FittedModel, trace)``; ``trace`` is a ``TrainingTrace`` (the
    lambda search for ``duality``, optimizer iterations for the ranking
    models) or None for ``rlearner_gain``.
    """
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    config = config or TrainConfig()
    train, val = ds.subset(split.train), ds.subset(split.validation)
    train.require_both_groups(f"training {kind}")
    trace = None
    if kind == "rlearner_gain":
        fitted = FittedModel(kind, fit_rlearner(train, reg_weight, mean_strategy=mean_strategy),
                             {"reg_weight": reg_weight, "mean_strategy": mean_strategy})
    elif kind == "duality":
        lam, dm = select_lambda(ds, split, lambda_grid, reg_weight, mean_strategy)
        fitted = FittedModel(kind, dm, {"lambda": lam, "reg_weight": reg_weight, "mean_strategy": mean_strategy})
        trace = TrainingTrace()
        for g in sorted(dm.validation_aucc):
            a = dm.validation_aucc[g]
            trace.append(**{"lambda": g, "validation_aucc": float("nan") if a is None else a})
    else:
        stats = None
        if config.standardize:
            train, stats = standardize(train)
        if kind == "drm":
            scorer, trace = train_drm(train, config)
        else:
            constraint = (constraint or ConstraintSpec()).validate()
            scorer, trace = train_constrained(train, config, constraint)
        fitted = FittedModel(kind, LinearScorer(scorer.weights, scorer.bias, stats),
                             {"train_config": config.to_dict()})
        if kind == "constrained":
            fitted.info["constraint"] = constraint.to_dict()
    fitted.info["validation_aucc"] = _validation_aucc(fitted, val)
    return fitted, trace
