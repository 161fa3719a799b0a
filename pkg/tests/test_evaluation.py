import numpy as np
import pytest

from conftest import linear_spec, moderate_spec
from costuplift.data import gen_synthetic
from costuplift.errors import ComparisonError, EvaluationError, UndefinedSlopeError, ValidationError
from costuplift.evaluation import (
    CostCurve, aucc, compare_models, cost_curve, evaluate_scores, improvement_pct, relative_gain, slope_r,
)

# 4 treated / 4 control, scores descending with row index
SCORES = np.arange(8, 0, -1, dtype=float)
T = np.array([1, 0, 1, 0, 1, 0, 1, 0])
GAIN = np.array([5, 1, 4, 2, 3, 3, 2, 4], dtype=float)
COST = np.array([2, 1, 2, 1, 1, 1, 1, 1], dtype=float)


def enumeration_oracle(scores, t, gain, cost, pct):
    n = len(scores)
    k = -(-n * pct // 100)
    top = sorted(range(n), key=lambda i: (-scores[i], i))[:k]
    tr = [i for i in top if t[i] == 1]
    co = [i for i in top if t[i] == 0]
    if not tr or not co:
        return None
    mean = lambda v, idx: sum(v[i] for i in idx) / len(idx)  # noqa: E731
    return (len(tr) * (mean(cost, tr) - mean(cost, co)), len(tr) * (mean(gain, tr) - mean(gain, co)))


def curve_from(points):
    pts = np.array([(0.0, 0.0)] + points)
    return CostCurve(np.arange(len(pts), dtype=float), pts[:, 0], pts[:, 1], (100.0,))


def test_hand_instance_values(backend):
    c = cost_curve(SCORES, T, GAIN, COST, grid=(25, 50, 75, 100))
    assert c.points == [(0, 0), (1, 4), (2, 6), (2, 6), (2, 4)]
    assert aucc(c) == pytest.approx(0.875, abs=1e-15)


def test_hand_instance_matches_enumeration_on_full_grid(backend):
    c = cost_curve(SCORES, T, GAIN, COST)
    expect = [(0.0, 0.0)]
    skipped = []
    for p in range(1, 101):
        v = enumeration_oracle(SCORES, T, GAIN, COST, p)
        if v is None:
            skipped.append(p)
        else:
            expect.append(v)
    assert c.points == expect
    assert c.skipped == skipped


def test_random_instances_match_enumeration(backend):
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(4, 40))
        s = np.round(rng.normal(size=n), 1)  # ties exercised
        t = rng.integers(0, 2, n)
        t[:2] = [0, 1]
        g, cst = rng.normal(size=n), rng.normal(size=n)
        grid = (7, 33, 50, 90, 100)
        c = cost_curve(s, t, g, cst, grid)
        expect = [v for v in (enumeration_oracle(s, t, g, cst, p) for p in grid) if v is not None]
        np.testing.assert_allclose(np.array(c.points[1:]), np.array(expect), rtol=1e-12, atol=1e-12)


def test_grid_100_is_whole_population():
    c = cost_curve(SCORES, T, GAIN, COST, grid=(100,))
    ate_g = GAIN[T == 1].mean() - GAIN[T == 0].mean()
    ate_c = COST[T == 1].mean() - COST[T == 0].mean()
    assert c.points[1:] == [(4 * ate_c, 4 * ate_g)]


def test_missing_group_at_endpoint():
    with pytest.raises(EvaluationError):
        cost_curve(SCORES, np.ones(8), GAIN, COST)


def test_grid_must_end_at_100():
    with pytest.raises(ValidationError):
        cost_curve(SCORES, T, GAIN, COST, grid=(10, 50))


def test_aucc_diagonal():
    assert aucc(curve_from([(3.0, 7.0)])) == 0.5


def test_aucc_trapezoid_example():
    assert aucc(curve_from([(0.2, 0.8), (1.0, 1.0)])) == pytest.approx(0.80, abs=1e-15)


def test_aucc_nonpositive_endpoint_names_axis():
    with pytest.raises(EvaluationError, match="cost"):
        aucc(curve_from([(1.0, 1.0), (0.0, 2.0)]))
    with pytest.raises(EvaluationError, match="gain"):
        aucc(curve_from([(1.0, -1.0)]))


def _synthetic(seed):
    ds, tr, tc = gen_synthetic(linear_spec(n=4000, d=5, seed=seed, noise=1.0))
    return ds, tr, tc


def test_aucc_invariances():
    ds, tr, _ = _synthetic(0)
    s = tr + np.random.default_rng(0).normal(size=ds.n)
    base = evaluate_scores(s, ds.treatment, ds.gain, ds.cost).aucc
    assert evaluate_scores(s, ds.treatment, 3.5 * ds.gain, ds.cost).aucc == pytest.approx(base, abs=1e-12)
    assert evaluate_scores(s, ds.treatment, ds.gain, 0.2 * ds.cost).aucc == pytest.approx(base, abs=1e-12)
    assert evaluate_scores(np.exp(s) + 4, ds.treatment, ds.gain, ds.cost).aucc == base


def test_random_scores_near_diagonal():
    ds, _, _ = gen_synthetic(moderate_spec(seed=1))
    c = cost_curve(np.random.default_rng(5).random(ds.n), ds.treatment, ds.gain, ds.cost)
    x, y = c.normalized()
    assert np.abs(y - x).max() < 0.05


def test_oracle_ranking_dominates_random():
    for seed in range(10):
        ds, tr, _ = _synthetic(seed)
        x, y = cost_curve(tr, ds.treatment, ds.gain, ds.cost).normalized()
        assert np.all(y >= x - 0.01)


def test_non_monotone_cost_warns():
    t = np.array([1, 0, 1, 0])
    rep = evaluate_scores([4, 3, 2, 1], t, [1, 0, 1, 0], [1, 0, -0.5, 0], grid=(50, 100))
    assert rep.curve.inc_cost.tolist() == [0.0, 1.0, 0.5]
    assert rep.warnings


# --- slope ----------------------------------------------------------------------

def test_slope_everyone_matches_oracle_ratio():
    ds, tr, tc = gen_synthetic(linear_spec(n=3000, d=3, seed=2, cost_coeff_scale=0.3))
    rep = slope_r(np.zeros(ds.n), ds.treatment, ds.gain, ds.cost)
    t = ds.treatment == 1
    # noise-free: the difference in means is the oracle effect difference plus baseline imbalance
    base_g = ds.gain - ds.treatment * tr
    base_c = ds.cost - ds.treatment * tc
    ate_g = tr[t].mean() + base_g[t].mean() - base_g[~t].mean()
    ate_c = tc[t].mean() + base_c[t].mean() - base_c[~t].mean()
    assert rep.r == pytest.approx(ate_g / ate_c, rel=1e-12)
    assert rep.n_selected == ds.n


def test_slope_identical_outcomes():
    ds, _, _ = _synthetic(3)
    assert slope_r(np.zeros(ds.n), ds.treatment, ds.gain, ds.gain).r == pytest.approx(1.0)


def test_slope_top_k_and_threshold():
    rep = slope_r(SCORES, T, GAIN, COST, top_k=4)
    assert rep.n_selected == 4 and rep.r == pytest.approx(3.0 / 1.0)
    assert slope_r(SCORES, T, GAIN, COST, threshold=4.5).r == rep.r


def test_slope_zero_cost():
    with pytest.raises(UndefinedSlopeError):
        slope_r(SCORES, T, GAIN, np.ones(8))


def test_relative_gain():
    assert relative_gain(1.3, 1.3) == 0
    assert relative_gain(1.5, 1.0) == pytest.approx(0.5)
    with pytest.raises(UndefinedSlopeError):
        relative_gain(1.0, 0.0)
    assert slope_r(SCORES, T, GAIN, COST, top_k=4, benchmark_r=2.0).relative_gain == pytest.approx(0.5)


# --- comparison -------------------------------------------------------------------

def _reports(values):
    out = []
    for mid, a in values.items():
        r = evaluate_scores(SCORES, T, GAIN, COST, model_id=mid)
        r.aucc = a
        out.append(r)
    return out


def test_table_ordering_covertype_column():
    vals = {"duality": 0.783, "drm": 0.840, "rlearner_gain": 0.779, "constrained": 0.915, "causal_forest": 0.832}
    table = compare_models(_reports(vals))
    assert [r["model_id"] for r in table.rows] == ["constrained", "drm", "causal_forest", "duality", "rlearner_gain"]
    assert table.rows[0]["imp_pct"] == pytest.approx(100 * (0.915 - 0.783) / 0.783)


def test_improvement_24_6_percent():
    assert round(improvement_pct(0.678, 0.544), 1) == 24.6


def test_single_report_zero_improvement():
    table = compare_models(_reports({"duality": 0.6}))
    assert table.rows[0]["imp_pct"] == 0.0


def test_random_row_and_failures():
    table = compare_models(_reports({"duality": 0.6, "drm": 0.7}), include_random=True,
                           failures={"constrained": "diverged"})
    ids = [r["model_id"] for r in table.rows]
    assert ids == ["drm", "duality", "random", "constrained"]
    assert "failed" in table.to_text()


def test_mismatched_evaluation_rows():
    a = evaluate_scores(SCORES, T, GAIN, COST, model_id="a")
    b = evaluate_scores(SCORES, T, GAIN, COST + 1, model_id="b")
    with pytest.raises(ComparisonError):
        compare_models([a, b])


def test_curve_csv(tmp_path):
    c = cost_curve(SCORES, T, GAIN, COST)
    c.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "percent,inc_cost,inc_gain,normalized_x,normalized_y"
    assert len(lines) == 1 + len(c.percents)
