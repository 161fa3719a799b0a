"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 250000] [--repeat 20]
"""
import argparse
import time

import numpy as np

from costuplift import kernels
from costuplift.data import SyntheticSpec, gen_synthetic
from costuplift.drm import TrainConfig, train_drm


def best_of(fn, repeat):
    fn()  # warm-up (jit compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=250_000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=50)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.n
    s = np.tanh(rng.normal(size=n))
    t = (rng.random(n) < 0.5).astype(np.int8)
    g, c = rng.normal(size=n), rng.normal(size=n)
    p, _, _ = kernels._portfolio_forward_numpy(s, t, g, c)
    order = np.argsort(-s, kind="stable")
    ts, gs, cs = t[order], g[order], c[order]
    cut = np.array([-(-n * k // 100) for k in range(1, 101)], dtype=np.int64)

    cases = {
        "portfolio_forward": ("_portfolio_forward", (s, t, g, c)),
        "portfolio_backward": ("_portfolio_backward", (p, t, g, c, 0.3, -0.7)),
        "cumulative_groups": ("_cumulative_groups", (ts, gs, cs, cut)),
    }
    print(f"N={n}, best of {args.repeat}")
    print(f"{'kernel':<20} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, (prefix, a) in cases.items():
        t_np = best_of(lambda: getattr(kernels, prefix + "_numpy")(*a), args.repeat)
        if kernels.HAS_NUMBA:
            t_nb = best_of(lambda: getattr(kernels, prefix + "_numba")(*a), args.repeat)
            print(f"{name:<20} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.2f}")
        else:
            print(f"{name:<20} {1e3 * t_np:10.2f} {'n/a':>10}")

    spec = SyntheticSpec(n_samples=n, n_features=10, gain_effect_intercept=1.0, cost_effect_intercept=1.0,
                         gain_effect_coeffs=list(rng.normal(size=10)), noise_std=0.5)
    ds, _, _ = gen_synthetic(spec)
    cfg = TrainConfig(iterations=args.iterations)
    saved = kernels.USE_NUMBA
    for label, flag in (("numpy", False), ("numba", True)):
        if flag and not kernels.HAS_NUMBA:
            continue
        kernels.USE_NUMBA = flag
        elapsed = best_of(lambda: train_drm(ds, cfg), 3)
        print(f"train_drm {args.iterations} iterations [{label}]: {elapsed:.3f} s")
    kernels.USE_NUMBA = saved


if __name__ == "__main__":
    main()
