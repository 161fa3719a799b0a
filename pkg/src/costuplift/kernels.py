"""Row-loop kernels with a numba path and a pure-numpy path.

The numba path is used when numba imports and the environment variable
``COSTUPLIFT_DISABLE_NUMBA`` is unset or ``0``.  Both paths are kept
importable under explicit names so they can be checked against each other.
"""
import os

import numpy as np

_flag = os.environ.get("COSTUPLIFT_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


USE_NUMBA = HAS_NUMBA


# ---------------------------------------------------------------------------
# group softmax + effect-weighted treatment effects
# ---------------------------------------------------------------------------

def _portfolio_forward_numpy(s, treated, gain, cost):
    t = treated.astype(bool)
    p = np.empty(s.shape[0])
    for mask in (t, ~t):
        e = np.exp(s[mask] - s[mask].max())
        p[mask] = e / e.sum()
    signed = np.where(t, p, -p)
    return p, float(signed @ gain), float(signed @ cost)


@njit(cache=True)
def _portfolio_forward_numba(s, treated, gain, cost):
    n = s.shape[0]
    m1 = -np.inf
    m0 = -np.inf
    for i in range(n):
        if treated[i]:
            if s[i] > m1:
                m1 = s[i]
        elif s[i] > m0:
            m0 = s[i]
    p = np.empty(n)
    z1 = 0.0
    z0 = 0.0
    for i in range(n):
        if treated[i]:
            e = np.exp(s[i] - m1)
            z1 += e
        else:
            e = np.exp(s[i] - m0)
            z0 += e
        p[i] = e
    tau_r = 0.0
    tau_c = 0.0
    for i in range(n):
        if treated[i]:
            p[i] /= z1
            tau_r += gain[i] * p[i]
            tau_c += cost[i] * p[i]
        else:
            p[i] /= z0
            tau_r -= gain[i] * p[i]
            tau_c -= cost[i] * p[i]
    return p, tau_r, tau_c


def _portfolio_backward_numpy(p, treated, gain, cost, g_r, g_c):
    t = treated.astype(bool)
    a = g_r * gain + g_c * cost
    pa = p * a
    abar = np.where(t, pa[t].sum(), pa[~t].sum())
    return np.where(t, 1.0, -1.0) * p * (a - abar)


@njit(cache=True)
def _portfolio_backward_numba(p, treated, gain, cost, g_r, g_c):
    n = p.shape[0]
    a1 = 0.0
    a0 = 0.0
    for i in range(n):
        a = g_r * gain[i] + g_c * cost[i]
        if treated[i]:
            a1 += p[i] * a
        else:
            a0 += p[i] * a
    ds = np.empty(n)
    for i in range(n):
        a = g_r * gain[i] + g_c * cost[i]
        if treated[i]:
            ds[i] = p[i] * (a - a1)
        else:
            ds[i] = -p[i] * (a - a0)
    return ds


# ---------------------------------------------------------------------------
# cumulative group sums along a ranking
# ---------------------------------------------------------------------------

def _cumulative_groups_numpy(treated, gain, cost, cutoffs):
    t = treated.astype(np.float64)
    c = 1.0 - t
    idx = cutoffs - 1
    out = np.empty((6, cutoffs.shape[0]))
    out[0] = np.cumsum(t)[idx]
    out[1] = np.cumsum(c)[idx]
    out[2] = np.cumsum(gain * t)[idx]
    out[3] = np.cumsum(gain * c)[idx]
    out[4] = np.cumsum(cost * t)[idx]
    out[5] = np.cumsum(cost * c)[idx]
    return out


@njit(cache=True)
def _cumulative_groups_numba(treated, gain, cost, cutoffs):
    out = np.empty((6, cutoffs.shape[0]))
    nt = 0.0
    nc = 0.0
    rt = 0.0
    rc = 0.0
    ct = 0.0
    cc = 0.0
    j = 0
    for i in range(treated.shape[0]):
        if j >= cutoffs.shape[0]:
            break
        if treated[i]:
            nt += 1.0
            rt += gain[i]
            ct += cost[i]
        else:
            nc += 1.0
            rc += gain[i]
            cc += cost[i]
        while j < cutoffs.shape[0] and cutoffs[j] == i + 1:
            out[0, j] = nt
            out[1, j] = nc
            out[2, j] = rt
            out[3, j] = rc
            out[4, j] = ct
            out[5, j] = cc
            j += 1
    return out


def portfolio_forward(s, treated, gain, cost):
    """Group softmax of ``s`` and the resulting signed weighted effects.

    Returns ``(p, tau_bar_gain, tau_bar_cost)``.  Callers must ensure both
    groups are nonempty.
    """
    if USE_NUMBA:
        return _portfolio_forward_numba(s, treated, gain, cost)
    return _portfolio_forward_numpy(s, treated, gain, cost)


def portfolio_backward(p, treated, gain, cost, g_r, g_c):
    """Gradient of ``g_r * tau_bar_gain + g_c * tau_bar_cost`` w.r.t. ``s``."""
    if USE_NUMBA:
        return _portfolio_backward_numba(p, treated, gain, cost, float(g_r), float(g_c))
    return _portfolio_backward_numpy(p, treated, gain, cost, g_r, g_c)


def cumulative_groups(treated, gain, cost, cutoffs):
    """Per-group running counts and outcome sums at each cutoff.

    Rows are assumed already ordered by rank.  ``cutoffs`` are strictly
    increasing prefix lengths in ``[1, N]``.  Rows of the result: treated
    count, control count, treated gain, control gain, treated cost,
    control cost.
    """
    cutoffs = np.ascontiguousarray(cutoffs, dtype=np.int64)
    if USE_NUMBA:
        return _cumulative_groups_numba(treated, gain, cost, cutoffs)
    return _cumulative_groups_numpy(treated, gain, cost, cutoffs)
