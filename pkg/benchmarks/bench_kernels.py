"""Compare the numba and numpy gate-application backends.

    python3 benchmarks/bench_kernels.py --n 8,10,12 --repeat 3

For each chain size it times one first-order segment applied to the full
2^n identity (the oracle's hot loop) with each backend, plus the dense
group-exponential path as a reference, and checks that the results agree.
"""

import argparse
import time

import numpy as np

from pflattice import _kernels
from pflattice import formulas as fm
from pflattice import lattice as lat


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--n", default="6,8,10,12")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--order", type=int, default=1)
    parser.add_argument("--dense-max-n", type=int, default=10, help="skip the dense path above this size")
    args = parser.parse_args(argv)

    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    if _kernels.HAVE_NUMBA:
        # compile outside the timed region
        H = lat.heisenberg_random_field(3, 1.0, 0)
        fm.realize(fm.lie_trotter(lat.group_even_odd(H)), H, 0.1, backend="numba")

    print(f"{'n':>3} {'method':>8} {'seconds':>10} {'speedup':>8} {'max diff':>10}")
    for n in (int(v) for v in args.n.split(",")):
        H = lat.heisenberg_random_field(n, 1.0, 42)
        F = fm.formula_for_order(lat.group_even_odd(H), args.order)
        results = {}
        for b in backends:
            results[b] = best_of(lambda: fm.realize(F, H, 0.1, backend=b), args.repeat)
        if n <= args.dense_max_n:
            results["dense"] = best_of(lambda: fm.realize(F, H, 0.1, method="dense"), args.repeat)
        ref_time, ref = results["numpy"]
        for name, (secs, out) in results.items():
            diff = float(np.abs(out - ref).max())
            print(f"{n:>3} {name:>8} {secs:>10.4f} {ref_time / secs:>8.2f} {diff:>10.1e}")


if __name__ == "__main__":
    main()
