"""Closed-loop tracking with the one-step controller and with SMPC.

Prints post-transient RMS error for a piecewise reference and the settling
time of SMPC on a constant reference, over several seeds.
"""

import math
import sys

import numpy as np

from tclagg.chain import build_partition, quasi_stationary, rate_limit_steps
from tclagg.control import build_switched_family, closed_loop_run
from tclagg.params import TclParams


def settle_minutes(y, ref, h_seconds, window=6, tol=0.05):
    e = np.abs(y - ref) / ref
    ma = np.convolve(e, np.ones(window) / window, "valid") <= tol
    for i in range(len(ma)):
        if ma[i:].all():
            return (i + window - 1) * h_seconds / 60
    return math.nan


def main(seeds=5):
    p = TclParams(sigma=0.032)
    part = build_partition(p, 8, 40)
    fam = build_switched_family(p, part, 500)
    y0 = fam.H @ quasi_stationary(fam.chain(fam.nominal))
    seg = 90
    ref = np.append(np.repeat([1.0, 1.02, 0.98, 1.01], seg), 1.01) * y0
    mask = np.ones(len(ref), bool)
    for c in range(0, len(ref) - 1, seg):
        mask[c:c + 18] = False
    rl = rate_limit_steps(0.025, part.upsilon)
    for seed in range(seeds):
        one = closed_loop_run(fam, p, ref, len(ref) - 1, seed, "onestep")
        rms = math.sqrt(np.mean((one.y_true - ref)[mask] ** 2)) / ref.mean()
        c_ref = np.full(121, 0.97 * y0)
        sm = closed_loop_run(fam, p, c_ref, 120, seed, "smpc", horizon=5, rate_limit=rl)
        print(f"seed {seed}: onestep rms {rms:.3%}, smpc settles in "
              f"{settle_minutes(sm.y_true, c_ref, p.h_seconds):.2f} min")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 5)
