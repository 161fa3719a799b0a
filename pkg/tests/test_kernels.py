import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from costuplift import kernels

pytestmark = pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba unavailable")


def _case(seed, n):
    rng = np.random.default_rng(seed)
    t = np.zeros(n, dtype=np.int8)
    t[rng.permutation(n)[: max(1, n // 3)]] = 1
    t[0], t[-1] = 1, 0
    return (np.tanh(rng.normal(size=n)), t, rng.normal(size=n), rng.exponential(size=n))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 300))
def test_forward_paths_agree(seed, n):
    s, t, g, c = _case(seed, n)
    p1, r1, c1 = kernels._portfolio_forward_numba(s, t, g, c)
    p2, r2, c2 = kernels._portfolio_forward_numpy(s, t, g, c)
    np.testing.assert_allclose(p1, p2, rtol=1e-12, atol=1e-15)
    assert r1 == pytest.approx(r2, rel=1e-10, abs=1e-12)
    assert c1 == pytest.approx(c2, rel=1e-10, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 300))
def test_backward_paths_agree(seed, n):
    s, t, g, c = _case(seed, n)
    p, _, _ = kernels._portfolio_forward_numpy(s, t, g, c)
    a = kernels._portfolio_backward_numba(p, t, g, c, 0.7, -1.3)
    b = kernels._portfolio_backward_numpy(p, t, g, c, 0.7, -1.3)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 300))
def test_cumulative_paths_agree(seed, n):
    _, t, g, c = _case(seed, n)
    cut = np.unique(np.random.default_rng(seed).integers(1, n + 1, size=5)).astype(np.int64)
    a = kernels._cumulative_groups_numba(t, g, c, cut)
    b = kernels._cumulative_groups_numpy(t, g, c, cut)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-9)


def test_cumulative_matches_direct_sums():
    _, t, g, c = _case(3, 40)
    cut = np.array([1, 7, 40], dtype=np.int64)
    out = kernels.cumulative_groups(t, g, c, cut)
    for j, k in enumerate(cut):
        tt = t[:k] == 1
        expect = [tt.sum(), (~tt).sum(), g[:k][tt].sum(), g[:k][~tt].sum(), c[:k][tt].sum(), c[:k][~tt].sum()]
        np.testing.assert_allclose(out[:, j], expect, rtol=1e-12, atol=1e-12)


def test_dispatch_honours_flag(monkeypatch):
    s, t, g, c = _case(1, 50)
    monkeypatch.setattr(kernels, "USE_NUMBA", False)
    a = kernels.portfolio_forward(s, t, g, c)
    monkeypatch.setattr(kernels, "USE_NUMBA", True)
    b = kernels.portfolio_forward(s, t, g, c)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)
