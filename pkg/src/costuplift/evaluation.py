"""Cost curves, AUCC, slope metrics and model comparison tables."""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import ComparisonError, EvaluationError, UndefinedSlopeError, ValidationError

DEFAULT_GRID = tuple(range(1, 101))
RANDOM_AUCC = 0.5


@dataclass(eq=False)
class CostCurve:
    """Cumulative incremental (cost, gain) along a score ranking.

    ``percents``, ``inc_cost`` and ``inc_gain`` start with the origin
    ``(0, 0, 0)``; grid points whose selection lacks a group are left out
    and listed in ``skipped``.
    """

    percents: np.ndarray
    inc_cost: np.ndarray
    inc_gain: np.ndarray
    grid: tuple
    skipped: list = field(default_factory=list)

    @property
    def endpoints(self):
        return float(self.inc_cost[-1]), float(self.inc_gain[-1])

    @property
    def points(self):
        return list(zip(self.inc_cost.tolist(), self.inc_gain.tolist()))

    @property
    def cost_monotone(self) -> bool:
        return bool(np.all(np.diff(self.inc_cost) >= 0))

    def normalized(self):
        c, g = self.endpoints
        return self.inc_cost / c, self.inc_gain / g

    def to_csv(self, path):
        c, g = self.endpoints
        nx = self.inc_cost / c if c != 0 else np.full_like(self.inc_cost, np.nan)
        ny = self.inc_gain / g if g != 0 else np.full_like(self.inc_gain, np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["percent", "inc_cost", "inc_gain", "normalized_x", "normalized_y"])
            for row in zip(self.percents, self.inc_cost, self.inc_gain, nx, ny):
                w.writerow([repr(float(v)) for v in row])


def _cutoff(n, pct):
    # ceil(n * pct / 100), exact for integral percents
    if float(pct).is_integer():
        return -(-n * int(pct) // 100)
    return math.ceil(round(n * pct / 100.0, 9))


def cost_curve(scores, treatment, gain, cost, grid=DEFAULT_GRID) -> CostCurve:
    """Rank rows by descending score (ties by row index) and accumulate
    ``#treated * (mean treated - mean control)`` for gain and cost over the
    top ``ceil(N * p / 100)`` rows for every grid percent ``p``.
    """
    scores = np.asarray(scores, dtype=float)
    t = np.asarray(treatment)
    n = scores.shape[0]
    if t.shape != (n,) or np.shape(gain) != (n,) or np.shape(cost) != (n,):
        raise ValidationError("scores, treatment, gain and cost must have equal length")
    if not np.all(np.isfinite(scores)):
        raise ValidationError("scores contain non-finite values")
    grid = tuple(sorted(float(p) for p in grid))
    if not grid or grid[0] <= 0 or grid[-1] != 100:
        raise ValidationError("grid must be percents in (0, 100] and include 100")
    n_t = int(t.sum())
    if n_t == 0 or n_t == n:
        raise EvaluationError("cost curve needs treated and control rows")

    order = np.argsort(-scores, kind="stable")
    ts = np.ascontiguousarray(t[order].astype(np.int8))
    gs = np.ascontiguousarray(np.asarray(gain, dtype=float)[order])
    cs = np.ascontiguousarray(np.asarray(cost, dtype=float)[order])
    ks = np.array([_cutoff(n, p) for p in grid], dtype=np.int64)
    uniq, inv = np.unique(ks, return_inverse=True)
    sums = kernels.cumulative_groups(ts, gs, cs, uniq)[:, inv]
    nt, nc, rt, rc, ct, cc = sums

    pct, xs, ys, skipped = [0.0], [0.0], [0.0], []
    for j, p in enumerate(grid):
        if nt[j] == 0 or nc[j] == 0:
            skipped.append(p)
            continue
        pct.append(p)
        xs.append(nt[j] * (ct[j] / nt[j] - cc[j] / nc[j]))
        ys.append(nt[j] * (rt[j] / nt[j] - rc[j] / nc[j]))
    return CostCurve(np.array(pct), np.array(xs), np.array(ys), grid, skipped)


def aucc(curve: CostCurve) -> float:
    """Area under the endpoint-normalized cost curve (trapezoids, signed).

    The straight diagonal scores exactly 0.5.
    """
    c, g = curve.endpoints
    if not c > 0:
        raise EvaluationError(f"cost axis endpoint is {c!r}; AUCC needs a positive total incremental cost")
    if not g > 0:
        raise EvaluationError(f"gain axis endpoint is {g!r}; AUCC needs a positive total incremental gain")
    x, y = curve.normalized()
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1])) / 2.0)


def rows_digest(treatment, gain, cost) -> str:
    h = hashlib.sha256()
    for a in (np.asarray(treatment, dtype=np.int8), np.asarray(gain, dtype=float), np.asarray(cost, dtype=float)):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


@dataclass(eq=False)
class AuccReport:
    aucc: float
    curve: CostCurve
    model_id: str = "model"
    eval_digest: Optional[str] = None
    random_baseline: float = RANDOM_AUCC
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        c, g = self.curve.endpoints
        return {
            "model_id": self.model_id,
            "aucc": self.aucc,
            "random_baseline": self.random_baseline,
            "eval_digest": self.eval_digest,
            "endpoints": {"inc_cost": c, "inc_gain": g},
            "n_points": int(len(self.curve.percents)),
            "skipped": list(self.curve.skipped),
            "warnings": list(self.warnings),
        }


def evaluate_scores(scores, treatment, gain, cost, model_id="model", grid=DEFAULT_GRID) -> AuccReport:
    curve = cost_curve(scores, treatment, gain, cost, grid)
    warnings = [] if curve.cost_monotone else ["cumulative cost is not monotone; signed area used"]
    return AuccReport(aucc(curve), curve, model_id, rows_digest(treatment, gain, cost), warnings=warnings)


# ---------------------------------------------------------------------------
# single-point slope
# ---------------------------------------------------------------------------

@dataclass
class SlopeReport:
    r: float
    ate_gain: float
    ate_cost: float
    n_selected: int
    relative_gain: Optional[float] = None


def relative_gain(r_exploit: float, r_explore: float) -> float:
    """Relative slope improvement of a targeted cohort over a random one."""
    if r_explore == 0:
        raise UndefinedSlopeError("benchmark slope is zero")
    return (r_exploit - r_explore) / r_explore


def slope_r(scores, treatment, gain, cost, top_k=None, threshold=None, benchmark_r=None) -> SlopeReport:
    """Gain-ATE over cost-ATE on the selected rows.

    Select the ``top_k`` highest scores, or all rows with score >= ``threshold``,
    or everyone when neither is given.
    """
    scores = np.asarray(scores, dtype=float)
    t = np.asarray(treatment).astype(bool)
    gain = np.asarray(gain, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if top_k is not None and threshold is not None:
        raise ValidationError("give top_k or threshold, not both")
    if top_k is not None:
        sel = np.zeros(scores.shape[0], dtype=bool)
        sel[np.argsort(-scores, kind="stable")[:int(top_k)]] = True
    elif threshold is not None:
        sel = scores >= threshold
    else:
        sel = np.ones(scores.shape[0], dtype=bool)
    st, sc = sel & t, sel & ~t
    if not st.any() or not sc.any():
        raise EvaluationError("selected rows need both treated and control members")
    ate_g = gain[st].mean() - gain[sc].mean()
    ate_c = cost[st].mean() - cost[sc].mean()
    if ate_c == 0:
        raise UndefinedSlopeError("cost ATE of the selection is zero")
    r = float(ate_g / ate_c)
    rel = relative_gain(r, benchmark_r) if benchmark_r is not None else None
    return SlopeReport(r, float(ate_g), float(ate_c), int(sel.sum()), rel)


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

@dataclass
class ComparisonTable:
    rows: list
    benchmark: Optional[str]

    def to_dict(self):
        return {"benchmark": self.benchmark, "rows": self.rows}

    def to_text(self) -> str:
        width = max([len("model")] + [len(r["model_id"]) for r in self.rows])
        lines = [f"{'model':<{width}}  {'AUCC':>7}  {'% imp.':>8}"]
        for r in self.rows:
            imp = "" if r["imp_pct"] is None else f"{r['imp_pct']:.1f}%"
            aucc_s = "failed" if r["aucc"] is None else f"{r['aucc']:.3f}"
            lines.append(f"{r['model_id']:<{width}}  {aucc_s:>7}  {imp:>8}")
        return "\n".join(lines) + "\n"


def improvement_pct(value: float, benchmark: float) -> float:
    return 100.0 * (value - benchmark) / benchmark


def compare_models(reports, benchmark: Optional[str] = "duality", include_random=False, failures=None) -> ComparisonTable:
    """Rank reports by AUCC with percent improvement over ``benchmark``.

    All reports must describe the same evaluation rows.  ``failures`` maps a
    model id to an error message and appends a row without a score.
    """
    reports = list(reports)
    if not reports:
        raise ValidationError("compare_models needs at least one report")
    digests = {r.eval_digest for r in reports}
    if len(digests) > 1:
        raise ComparisonError(f"reports were computed on different evaluation rows: {sorted(map(str, digests))}")
    entries = [(r.model_id, r.aucc) for r in reports]
    if include_random:
        entries.append(("random", RANDOM_AUCC))
    bench = dict(entries).get(benchmark) if benchmark else None
    entries.sort(key=lambda e: -e[1])
    rows = [
        {"model_id": mid, "aucc": a, "imp_pct": None if bench is None else improvement_pct(a, bench)}
        for mid, a in entries
    ]
    for mid, msg in (failures or {}).items():
        rows.append({"model_id": mid, "aucc": None, "imp_pct": None, "error": msg})
    return ComparisonTable(rows, benchmark if bench is not None else None)
