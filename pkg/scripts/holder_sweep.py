"""Hölder exponent recovery on fBm slices across a range of exponents."""
import argparse

import numpy as np

from sfde.analysis import estimate_holder
from sfde.sampling import sample_fbm_slice


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=2 ** 10)
    ap.add_argument("--paths", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    print("theta   fitted    R^2")
    for th in np.arange(0.05, 1.0, 0.1):
        s = sample_fbm_slice(args.points, th, 1.0, 1.0, seed=args.seed, n_samples=args.paths)
        fit = estimate_holder(s)
        print(f"{th:5.2f}  {fit.exponent:7.4f}  {fit.r_squared:8.5f}")


if __name__ == "__main__":
    main()
