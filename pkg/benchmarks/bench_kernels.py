"""Compare the compiled and numpy loss kernels.

    python benchmarks/bench_kernels.py [--batch 48] [--k 3047] [--repeat 20]

The default shape matches a full-size label space (3,047 concepts) with the
largest batch size used in the original experiments.
"""

import argparse
import timeit

import numpy as np

from conceptdetect._backend import kernels_ext, kernels_py
from conceptdetect.losses import EPSILON


def bench(mod, name, y, p, repeat):
    fn = getattr(mod, name)
    times = timeit.repeat(lambda: fn(y, p, EPSILON), number=1, repeat=repeat)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=48)
    ap.add_argument("--k", type=int, default=3047)
    ap.add_argument("--density", type=float, default=0.0037)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    y = (rng.random((args.batch, args.k)) < args.density).astype(np.float64)
    p = rng.random((args.batch, args.k))
    print(f"batch={args.batch} k={args.k} best of {args.repeat}")
    print(f"{'kernel':<20}{'numpy (ms)':>12}{'cython (ms)':>13}{'speedup':>9}")
    for name in ("soft_f1_components", "soft_f1_loss", "bce_loss"):
        t_py = bench(kernels_py, name, y, p, args.repeat)
        if kernels_ext is None:
            print(f"{name:<20}{t_py * 1e3:>12.3f}{'n/a':>13}{'':>9}")
            continue
        t_cy = bench(kernels_ext, name, y, p, args.repeat)
        print(f"{name:<20}{t_py * 1e3:>12.3f}{t_cy * 1e3:>13.3f}{t_py / t_cy:>8.1f}x")


if __name__ == "__main__":
    main()
