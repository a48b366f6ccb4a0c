"""Timing of the quantization routines over a range of sizes.

Univariate: n rows, m candidate splits. Bivariate: n rows, b x b rectangles.
Each configuration is timed as the best of ``--repeat`` runs.
"""

import argparse
import time
import warnings

import numpy as np
import pandas as pd

from upliftkit.data import UpliftDataset, UpliftWarning
from upliftkit.quantize import bin_uplift, square_uplift


def make(n, seed=0):
    rng = np.random.default_rng(seed)
    x, x2 = rng.uniform(size=n), rng.uniform(size=n)
    t = rng.integers(0, 2, n)
    y = rng.binomial(1, 0.3 + 0.3 * t * (x > 0.5))
    return UpliftDataset(pd.DataFrame({"x": x, "x2": x2, "treat": t, "y": y}), "y", "treat")


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 10000, 100000])
    ap.add_argument("--splits", type=int, nargs="+", default=[10, 100, 1000])
    ap.add_argument("--grids", type=int, nargs="+", default=[3, 5, 10, 15])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rows = []
    for n in args.sizes:
        ds = make(n)
        for m in args.splits:
            s = best_time(lambda: bin_uplift(ds, "x", n_split=m, alpha=0.05, n_min=30), args.repeat)
            rows.append({"kind": "univariate", "n": n, "param": m, "seconds": s})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UpliftWarning)
            for b in args.grids:
                s = best_time(lambda: square_uplift(ds, "x", "x2", n_split=b), args.repeat)
                rows.append({"kind": "bivariate", "n": n, "param": b * b, "seconds": s})
    print(pd.DataFrame(rows).to_string(index=False, float_format=lambda v: f"{v:.4f}"))


if __name__ == "__main__":
    main()
