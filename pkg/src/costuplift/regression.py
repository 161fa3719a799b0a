"""Closed-form (weighted) ridge regression with an unpenalized intercept."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError


@dataclass(frozen=True, eq=False)
class RidgeModel:
    weights: np.ndarray
    intercept: float
    reg_weight: float = 0.0
    singular: bool = False

    @property
    def d(self) -> int:
        return self.weights.shape[0]

    def predict(self, X) -> np.ndarray:
        return predict(self, X)

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "intercept": float(self.intercept),
            "reg_weight": float(self.reg_weight),
            "singular": bool(self.singular),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RidgeModel":
        return cls(np.asarray(d["weights"], dtype=float), float(d["intercept"]),
                   float(d.get("reg_weight", 0.0)), bool(d.get("singular", False)))


def _psd_solve(A, b):
    # Eigen-decomposition of the symmetric Gram matrix; directions with
    # eigenvalue under the relative cutoff are dropped (minimum-norm solution).
    vals, vecs = np.linalg.eigh(A)
    top = vals[-1] if vals.size else 0.0
    cutoff = max(top, 0.0) * A.shape[0] * np.finfo(float).eps * 10
    keep = vals > cutoff
    inv = np.zeros_like(vals)
    inv[keep] = 1.0 / vals[keep]
    return vecs @ (inv * (vecs.T @ b)), bool((~keep).any())


def fit_ridge(X, y, sample_weights=None, reg_weight: float = 0.0) -> RidgeModel:
    """Minimize ``sum_i w_i (y_i - x_i @ beta - b)^2 + reg_weight * |beta|^2``.

    The intercept is not penalized.  Rank-deficient systems return the
    minimum-norm solution with ``singular=True``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError(f"X {X.shape} and y {y.shape} do not align")
    if X.shape[0] < 1:
        raise ValidationError("fit_ridge needs at least one row")
    if reg_weight < 0:
        raise ValidationError(f"reg_weight must be nonnegative, got {reg_weight}")
    if sample_weights is None:
        sw = np.ones(X.shape[0])
    else:
        sw = np.asarray(sample_weights, dtype=float)
        if sw.shape != y.shape or not np.all(np.isfinite(sw)) or (sw < 0).any():
            raise ValidationError("sample_weights must be finite, nonnegative and one per row")
    total = sw.sum()
    if total <= 0:
        raise ValidationError("sample_weights sum to zero")
    x_mean = sw @ X / total
    y_mean = sw @ y / total
    Xc = X - x_mean
    Xw = Xc * sw[:, None]
    A = Xw.T @ Xc
    A[np.diag_indices_from(A)] += reg_weight
    beta, singular = _psd_solve(A, Xw.T @ (y - y_mean))
    return RidgeModel(beta, float(y_mean - x_mean @ beta), float(reg_weight), singular)


def predict(model: RidgeModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ShapeError(f"model expects {model.d} features, got array of shape {X.shape}")
    return X @ model.weights + model.intercept
