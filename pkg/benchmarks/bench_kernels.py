"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--quick]

Each kernel is called with identical inputs on both backends; the table
reports the best wall time per call and the speed-up of the compiled code.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from revunc import _pykernels

try:
    from revunc import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def tvp_band(n_periods: int, rng) -> np.ndarray:
    """Band storage of a random SPD block-tridiagonal matrix with 2x2 blocks."""
    from revunc.ssm import build_tvp_precision_system

    obs = rng.standard_normal(n_periods)
    load = np.column_stack([np.ones(n_periods), rng.standard_normal(n_periods)])
    sys = build_tvp_precision_system(obs, load, np.full(n_periods, 2.0), np.diag([50.0, 400.0]), np.zeros(2), np.eye(2))
    return sys.ab, sys.covector


def news_noise_inputs(n: int, rng):
    m, p = 5, 2
    Z = np.broadcast_to(np.array([[1.0, 1, 0, 1, 0], [1, 0, 1, 0, 1]]), (n, p, m)).copy()
    d = np.zeros((n, p))
    H = np.zeros((n, p, p))
    T = np.zeros((n, m, m))
    T[:, 0, 0] = 0.8
    c = np.zeros((n, m))
    c[:, 0] = 0.5
    s = np.exp(0.5 * rng.normal(-1.0, 0.5, size=(n, 4)))
    R = np.zeros((n, m, 4))
    R[:, 0, 0], R[:, 0, 1], R[:, 1, 1] = s[:, 0], s[:, 1], -s[:, 1]
    R[:, 3, 2], R[:, 4, 3] = s[:, 2], s[:, 3]
    Q = np.einsum("tij,tkj->tik", R, R)
    a1 = np.zeros(m)
    P1 = Q[0].copy()
    y = rng.standard_normal((n, p))
    return Z, d, H, T, c, Q, a1, P1, y


def cases(quick: bool):
    rng = np.random.default_rng(0)
    n_band = 200 if quick else 500
    n_ssm = 100 if quick else 300
    ab, cov = tvp_band(n_band, rng)
    ssm = news_noise_inputs(n_ssm, rng)
    probs, means, variances = (np.asarray(x) for x in _mixture())
    ystar = rng.normal(-2.0, 2.0, size=n_ssm * 10)
    h = rng.normal(-1.0, 1.0, size=ystar.size)
    u = rng.random(ystar.size)
    z = rng.standard_normal((1, n_ssm, 5))

    def band(mod):
        L = mod.band_cholesky(ab)
        return mod.band_solve_upper(L, mod.band_solve_lower(L, cov))

    def filt(mod):
        return mod.kalman_filter(*ssm)

    def ffbs(mod):
        out = mod.kalman_filter(*ssm)
        return mod.backward_sample(out[2], out[3], out[1], ssm[3], ssm[4], z)

    def mix(mod):
        return mod.draw_mixture_indicators(ystar, h, u, probs, means, variances)

    return [
        (f"band cholesky + solve (T={n_band}, 2x2 blocks)", band),
        (f"kalman filter (T={n_ssm}, m=5, p=2)", filt),
        (f"filter + backward sample (T={n_ssm})", ffbs),
        (f"mixture indicators (n={ystar.size})", mix),
    ]


def _mixture():
    from revunc.svol import MIXTURE_MEANS, MIXTURE_PROBS, MIXTURE_VARIANCES

    return MIXTURE_PROBS, MIXTURE_MEANS, MIXTURE_VARIANCES


def best_time(fn, repeat: int) -> float:
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10_000:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; run `python3 setup.py build_ext --inplace` first")
        return 1
    print(f"{'kernel':48s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speed-up':>9s}")
    for name, fn in cases(args.quick):
        a = fn(_pykernels)
        b = fn(_kernels)
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            np.testing.assert_allclose(x, y, rtol=1e-8, atol=1e-10)
        tp = best_time(lambda: fn(_pykernels), args.repeat)
        tc = best_time(lambda: fn(_kernels), args.repeat)
        print(f"{name:48s} {1e3 * tp:12.3f} {1e3 * tc:14.3f} {tp / tc:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
