"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--n 8] [--p 200000] [--repeat 20]

Prints one line per kernel with the best-of-``repeat`` wall time of each
backend and the speedup. JIT compilation is excluded by a warm-up call.
"""

import argparse
import timeit

import numpy as np

from dlsphere import _backend, _kernels
from dlsphere.model import make_rng


def best_time(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--p", type=int, default=200_000)
    ap.add_argument("--mu", type=float, default=1e-2)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if not _backend.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 0
    rng = make_rng(0)
    y = rng.standard_normal((args.n, args.p))
    q = rng.standard_normal(args.n)
    q /= np.linalg.norm(q)
    cases = [
        (f"sphere_derivs order={k}", lambda k=k: _kernels.sphere_derivs_numpy(q, y, args.mu, k), lambda k=k: _kernels.sphere_derivs_numba(q, y, args.mu, k))
        for k in (0, 1, 2)
    ]
    cases.append(("soft_threshold", lambda: _kernels.soft_threshold_numpy(y, 0.5), lambda: _kernels.soft_threshold_numba(y, 0.5)))
    print(f"n={args.n} p={args.p} mu={args.mu} best of {args.repeat}")
    print(f"{'kernel':<24}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, f_np, f_nb in cases:
        t_np, t_nb = best_time(f_np, args.repeat), best_time(f_nb, args.repeat)
        print(f"{name:<24}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
