"""Compare the time-domain and frequency-domain covariance of the mild solution.

The time route for a fractional time kernel takes several minutes per point,
so it only runs with --fractional-time.
"""
import argparse
import time

from sfde.params import ModelParams
from sfde.solution import covariance_u

PROBES = [(1.0, 0.0, 1.0, 0.0), (1.0, 0.0, 1.0, 0.3), (1.0, 0.0, 0.5, 0.0),
          (0.7, 0.2, 0.4, -0.5), (2.0, 0.0, 1.5, 1.0)]


def compare(p, probes):
    for args in probes:
        t0 = time.perf_counter()
        a = covariance_u(*args, p, route="time")
        t1 = time.perf_counter()
        b = covariance_u(*args, p, route="frequency")
        t2 = time.perf_counter()
        print(f"{args}  time {a:.12f} ({t1 - t0:.0f} s)  freq {b:.12f} ({t2 - t1:.0f} s)"
              f"  rel {abs(b / a - 1):.1e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fractional-time", action="store_true")
    args = ap.parse_args()
    print("white noise in time (SHE)")
    compare(ModelParams.she(), PROBES)
    if args.fractional_time:
        print("fractional: alpha=2 beta=0.8 gamma=0.1 H0=0.6 H1=0.5")
        compare(ModelParams(2.0, 0.8, 0.1, 0.6, (0.5,)), PROBES[:1])


if __name__ == "__main__":
    main()
