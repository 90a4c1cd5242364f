"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat N]

Inputs mirror real call sites: a 38-row stump scan (one feature of a
LOOCV training set), a larger 2000-row scan, the 40 ms voicing window at
16 kHz, and a transition count over a 4-minute dialogue at 0.1 s frames
plus a long 10^6-frame chain.
"""

import argparse
import timeit

import numpy as np

from adtalk import _kernels


def cases(rng):
    def split(n):
        xs = np.sort(rng.integers(0, n // 2, size=n).astype(float))
        ys = np.where(rng.random(n) < 0.5, 1, -1)
        ws = rng.random(n)
        return "split_losses", f"n={n}", (xs, ys, ws / ws.sum(), 1e-6)

    yield split(38)
    yield split(2000)
    t = np.arange(640) / 16000
    x = np.sin(2 * np.pi * 120 * t) + 0.1 * rng.standard_normal(t.size)
    yield "max_autocorr", "640 samples, lags 40-214", (x, 40, 214)
    yield "transition_counts", "2400 frames", (rng.integers(0, 5, size=2400), 5)
    yield "transition_counts", "1e6 frames", (rng.integers(0, 5, size=1_000_000), 5)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba not installed; only the numpy path is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18} {'input':<26} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for name, label, call_args in cases(rng):
        row = []
        impls = [_kernels.NUMPY_KERNELS[name]]
        if _kernels.HAVE_NUMBA:
            impls.append(_kernels.NUMBA_KERNELS[name])
        for fn in impls:
            fn(*call_args)  # warm up, triggers JIT compilation
            timer = timeit.Timer(lambda: fn(*call_args))
            loops, _ = timer.autorange()
            best = min(timer.repeat(args.repeat, loops)) / loops
            row.append(best * 1e6)
        if len(row) == 2:
            print(f"{name:<18} {label:<26} {row[0]:>10.1f} {row[1]:>10.1f} {row[0] / row[1]:>7.1f}x")
        else:
            print(f"{name:<18} {label:<26} {row[0]:>10.1f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
