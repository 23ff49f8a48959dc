"""Time one sweep against the number of nonzeros.

Prints per-sweep time for growing nnz on a fixed shape; the time per
nonzero should stay roughly flat.
"""

import argparse
import time

import numpy as np

from tensorscale import ScalingLists, SupportLayout, TargetProducts, log_convert, sweep
from tensorscale.instances import random_tensor_with_nnz


def per_sweep(A, k, reps):
    layout = SupportLayout.of(A, k)
    a, m, t = log_convert(A), ScalingLists.zeros(A.shape, k), TargetProducts.ones(A.shape, k)
    sweep(a, m, t, layout)
    t0 = time.perf_counter()
    for _ in range(reps):
        sweep(a, m, t, layout)
    return (time.perf_counter() - t0) / reps


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--shape", type=int, nargs="+", default=[100, 100, 100])
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--nnz", type=int, nargs="+", default=[50_000, 100_000, 200_000, 400_000, 800_000])
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'nnz':>10} {'ms/sweep':>10} {'ns/nnz':>8}")
    for nnz in args.nnz:
        dt = per_sweep(random_tensor_with_nnz(rng, args.shape, nnz), args.k, args.reps)
        print(f"{nnz:>10} {dt * 1e3:>10.2f} {dt / nnz * 1e9:>8.1f}")


if __name__ == "__main__":
    main()
