"""Reduced order versus output deviation for a heterogeneous population."""

import numpy as np

from tclagg.chain import build_partition
from tclagg.heterogeneity import HeterogeneitySpec, build_averaged_model
from tclagg.initial import PointMass, discretize_initial
from tclagg.params import TclParams
from tclagg.reduction import eliminate_state, reduce_order, truncation_bound


def main(n_p=500, steps=360, seed=6):
    base = TclParams(sigma=0.032)
    spec = HeterogeneitySpec.uniform("C", 2, 18, n_p, np.random.default_rng(seed), base)
    part = build_partition(base, 10, 50)
    avg = build_averaged_model(spec, part)
    X0 = discretize_initial(PointMass(0, base.theta_s), part)
    y_full = avg.aggregate.output(avg.aggregate.mean_trajectory(X0, steps))
    full = eliminate_state(avg.P_bar, n_p, avg.p_on_bar)
    print("order  sup_dev_after_100_kW  rel_to_steady  hankel_tail_bound")
    for k in (2, 3, 4, 6, 8, 12, 20):
        red = reduce_order(full, k, X0)
        dev = np.abs(red.step_response(X0, steps) - y_full)[100:].max()
        tail = truncation_bound(red, k - red.n_marginal)
        print(f"{k:5d}  {dev:20.4g}  {dev / y_full[-1]:13.3%}  {tail:17.4g}")


if __name__ == "__main__":
    main()
