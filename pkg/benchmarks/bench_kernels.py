"""Time the compiled and pure-Python kernels on the same chains.

Both backends consume the same random stream, so each pair of runs also
checks that the traces agree bit for bit.

    python benchmarks/bench_kernels.py --n 200 --p 10 --sweeps 200
"""

import argparse
import time

import numpy as np

from ibart.core import HyperParams
from ibart.data import gen_friedman
from ibart.sampler import SamplerConfig, run_chain


def time_chain(data, hp, backend, seed, repeats):
    best, trace = float("inf"), None
    for _ in range(repeats):
        cfg = SamplerConfig(hp=hp, backend=backend)
        t0 = time.perf_counter()
        trace = run_chain(data, cfg, np.random.default_rng(seed))
        best = min(best, time.perf_counter() - t0)
    return best, trace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--p", type=int, default=10)
    ap.add_argument("--sweeps", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    data = gen_friedman(args.n, args.p, 1.0, np.random.default_rng(args.seed))
    burn = max(1, args.sweeps // 5)
    rows = []
    for mode, trees in (("infinite", None), ("classic", 50), ("classic", 200)):
        hp = HyperParams(mode=mode, iterations=args.sweeps, burn_in=burn,
                         **({"classic_K": trees} if trees else {}))
        t_py, a = time_chain(data, hp, "python", args.seed + 1, args.repeats)
        t_c, c = time_chain(data, hp, "cython", args.seed + 1, args.repeats)
        same = (np.array_equal(a.sigma2, c.sigma2) and np.array_equal(a.K, c.K)
                and np.array_equal(a.fitted, c.fitted))
        label = mode if trees is None else f"{mode} K={trees}"
        rows.append((label, float(c.K.mean()), t_py, t_c, same))

    total = args.sweeps + burn
    print(f"n={args.n} p={args.p} sweeps={total} (best of {args.repeats})")
    print(f"{'model':<16}{'mean K':>8}{'python ms/sweep':>18}{'cython ms/sweep':>18}"
          f"{'speedup':>10}{'identical':>11}")
    for label, K, t_py, t_c, same in rows:
        print(f"{label:<16}{K:>8.1f}{1e3 * t_py / total:>18.2f}{1e3 * t_c / total:>18.2f}"
              f"{t_py / t_c:>10.1f}{str(same):>11}")


if __name__ == "__main__":
    main()
