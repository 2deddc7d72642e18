"""Time the accelerated kernels against the pure-numpy fallback.

The package selects its kernel implementation at import time from the
PTFENS_NO_NUMBA environment variable; this script ignores the selection and
times both implementations side by side on identical inputs.

    python3 benchmarks/bench_kernels.py --points 200000 --repeat 5
"""

import argparse
import time

import numpy as np

from ptfens import _kernels


def _time(fn, args, repeat):
    fn(*args)  # warm the JIT cache before timing
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=200_000,
                        help="retention evaluation points (default 200000)")
    parser.add_argument("--members", type=int, default=13,
                        help="ensemble members (default 13)")
    parser.add_argument("--population", type=int, default=50,
                        help="GA population size (default 50)")
    parser.add_argument("--replicas", type=int, default=100,
                        help="bootstrap replicas (default 100)")
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repetitions, best-of (default 5)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    n, m, p, r = args.points, args.members, args.population, args.replicas

    codes = rng.integers(0, 3, size=n).astype(np.int8)
    params = np.empty((n, 4))
    params[:, 0] = rng.uniform(0.0, 0.1, n)      # theta_r (ignored by cmp)
    params[:, 1] = rng.uniform(0.3, 0.5, n)      # theta_s
    params[:, 2] = rng.uniform(0.005, 50.0, n)   # alpha / psi_b / psi_e
    params[:, 3] = rng.uniform(1.1, 12.0, n)     # n / lambda / b
    cmp_rows = codes == _kernels.FAMILY_CMP
    params[cmp_rows, 0] = params[cmp_rows, 1]    # cmp packs theta_s first
    params[cmp_rows, 1] = rng.uniform(1.0, 80.0, int(cmp_rows.sum()))
    params[cmp_rows, 2] = rng.uniform(2.0, 12.0, int(cmp_rows.sum()))
    psi = rng.uniform(0.0, 15000.0, n)

    pop = rng.random((p, m))
    preds = rng.uniform(0.0, 0.6, (m, n))
    observed = rng.uniform(0.0, 0.6, n)
    estimates = rng.uniform(0.0, 0.6, (r, n))

    cases = [
        ("theta_points", (codes, params, psi),
         _kernels.theta_points_numpy,
         getattr(_kernels, "theta_points_numba", None)),
        ("chi2_population", (pop, preds, observed),
         _kernels.chi2_population_numpy,
         getattr(_kernels, "chi2_population_numba", None)),
        ("replica_mean_std", (estimates,),
         _kernels.replica_mean_std_numpy,
         getattr(_kernels, "replica_mean_std_numba", None)),
    ]

    print(f"points={n} members={m} population={p} replicas={r} "
          f"(best of {args.repeat})")
    for name, call_args, numpy_fn, numba_fn in cases:
        t_np = _time(numpy_fn, call_args, args.repeat)
        line = f"{name:<18} numpy {t_np * 1e3:9.2f} ms"
        if numba_fn is not None:
            t_nb = _time(numba_fn, call_args, args.repeat)
            line += f"   numba {t_nb * 1e3:9.2f} ms   speedup {t_np / t_nb:6.2f}x"
        else:
            line += "   numba unavailable"
        print(line)


if __name__ == "__main__":
    main()
