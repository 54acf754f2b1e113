"""Scenario runners behind the command-line interface.

Every runner is a function of the configuration alone and writes its
artifacts into one output directory.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .aggregate import AggregateModel
from .bounds import (clustered_population_bound, empirical_abstraction_error,
                     homogeneous_population_bound)
from .chain import (assemble_chain, build_chain, build_deadband_partition,
                    build_deterministic_baseline, build_partition, export_chain,
                    gaussian_marginals, quasi_stationary, rate_limit_steps,
                    structure_violations)
from .control import SwitchedControlModel, build_switched_family, closed_loop_run
from .heterogeneity import (HeterogeneitySpec, build_averaged_model, build_clustered_model,
                            cluster_diameter, lipschitz_constant)
from .initial import GaussianBand, Histogram, PointMass, UniformBand, discretize_initial
from .population import HETEROGENEITY, mc_expected_power, stream
from .reduction import eliminate_state, reduce_order


def fmt(v) -> str:
    return "%.12g" % v


def write_csv(path, header, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([r if isinstance(r, (int, np.integer)) else fmt(r) for r in row])


@dataclass
class Scenario:
    """Objects derived from a configuration."""

    cfg: object
    params: object
    partition: object
    spec: HeterogeneitySpec | None

    @property
    def n_p(self):
        return self.cfg.population.n_p

    @property
    def population_params(self):
        return self.params if self.spec is None else self.spec.param_list()


def make_scenario(cfg) -> Scenario:
    params = cfg.params.build()
    part = build_partition(params, cfg.abstraction.l, cfg.abstraction.m)
    spec = None
    het = cfg.heterogeneity
    if het is not None:
        d = het.distribution
        if d.type == "uniform":
            rng = stream(cfg.simulation.seed, 0, HETEROGENEITY)
            spec = HeterogeneitySpec.uniform(het.parameter, d.lo, d.hi,
                                             cfg.population.n_p, rng, params)
        else:
            spec = HeterogeneitySpec(het.parameter, np.array(d.values), params)
    return Scenario(cfg, params, part, spec)


def initial_distribution(sc: Scenario, chain=None):
    init = sc.cfg.population.init
    p = sc.params
    if init.type == "point":
        return PointMass(init.mode, p.theta_s if init.theta is None else init.theta)
    if init.type == "uniform":
        return UniformBand(init.mode, init.low, init.high)
    if init.type == "gaussian":
        return GaussianBand(init.mode, p.theta_s if init.theta is None else init.theta, init.std)
    if chain is None:
        chain = build_chain(sc.partition, p)
    return Histogram(tuple(quasi_stationary(chain)), sc.partition)


def write_common(out: Path, cfg):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfg.dump())
    (out / "seed.txt").write_text(f"{cfg.simulation.seed}\n")
    (out / "version.txt").write_text(f"tclagg {__version__}\n")


def write_bounds_txt(out: Path, sc: Scenario, X0=None):
    p = sc.params
    lines = []
    if p.sigma <= 0:
        (out / "bounds.txt").write_text("applicable: false\nreason: sigma is zero\n")
        return
    for N in sc.cfg.bounds.horizons:
        if N < 1:
            continue
        rep = homogeneous_population_bound(p, sc.partition, N, sc.n_p, X0=X0)
        lines.append(f"# N = {N}\n" + rep.to_text())
    (out / "bounds.txt").write_text("".join(lines) or "applicable: false\n")


def mean_power_truth(sc: Scenario, threads=1):
    sim = sc.cfg.simulation
    init = initial_distribution(sc)
    return mc_expected_power(init, sc.population_params, sim.steps, sim.mc_runs, sim.seed,
                             n_p=sc.n_p, threads=threads)


def cmd_simulate(cfg, out, threads=1):
    out = Path(out)
    sc = make_scenario(cfg)
    write_common(out, cfg)
    mc = mean_power_truth(sc, threads)
    t = np.arange(len(mc.mean))
    write_csv(out / "trajectories.csv", ["t", "mc_mean_kW", "mc_stderr_kW"], [t, mc.mean, mc.stderr])
    write_bounds_txt(out, sc)
    return mc


def _stochastic_output(sc: Scenario, X0, steps):
    """Mean power of the stochastic abstraction, plus the model itself."""
    if sc.spec is None:
        model = AggregateModel.from_chain(build_chain(sc.partition, sc.params), sc.n_p)
        return model.output(model.mean_trajectory(X0, steps)), model
    het = sc.cfg.heterogeneity
    if het.mode == "averaging":
        av = build_averaged_model(sc.spec, sc.partition)
        model = av.aggregate
        return model.output(model.mean_trajectory(X0, steps)), model
    cl = build_clustered_model(sc.spec, sc.partition, het.n_clusters)
    return cl.mean_output(X0, steps), cl


def cmd_abstract(cfg, out, threads=1):
    out = Path(out)
    sc = make_scenario(cfg)
    write_common(out, cfg)
    p = sc.params
    report = [f"n_bins: {sc.partition.n_bins}", f"n_states: {sc.partition.n_states}",
              f"upsilon: {fmt(sc.partition.upsilon)}"]
    if p.sigma > 0:
        chain = build_chain(sc.partition, p)
        export_chain(chain, out / "chain.csv")
        report += [f"max_row_defect: {fmt(np.abs(chain.P.sum(1) - 1).max())}",
                   f"structure_violations: {structure_violations(chain)}"]
        X0 = discretize_initial(initial_distribution(sc, chain), sc.partition)
        y, _ = _stochastic_output(sc, X0, cfg.simulation.steps)
        write_csv(out / "trajectories.csv", ["t", "y_abs_kW"], [np.arange(len(y)), y])
    base = build_deterministic_baseline(p, cfg.abstraction.n_d, cfg.abstraction.baseline_method)
    export_chain(base, out / "baseline.csv")
    report += [f"baseline_states: {base.n_states}",
               f"baseline_max_row_defect: {fmt(np.abs(base.P.sum(1) - 1).max())}"]
    (out / "validation.txt").write_text("\n".join(report) + "\n")
    write_bounds_txt(out, sc)


def baseline_output(sc: Scenario, steps):
    ab = sc.cfg.abstraction
    base = build_deterministic_baseline(sc.params, ab.n_d, ab.baseline_method)
    part = build_deadband_partition(sc.params, ab.n_d)
    init = initial_distribution(sc)
    if isinstance(init, Histogram):
        # collapse the fine histogram onto the dead-band bins
        fine = sc.partition
        X0 = np.zeros(base.n_states)
        for m in (0, 1):
            b = part.bin_of(fine.representatives)
            np.add.at(X0, m * part.n_bins + b, np.asarray(init.masses)[m * fine.n_bins:(m + 1) * fine.n_bins])
    else:
        X0 = _clipped_masses(init, part)
    p_on = sc.params.P_rate_on if sc.spec is None else np.mean([q.P_rate_on for q in sc.spec.param_list()])
    model = AggregateModel(base.P, sc.n_p, p_on)
    return model.output(model.mean_trajectory(X0, steps))


def _clipped_masses(init, part):
    """Initial masses on a dead-band-only partition; outside mass goes to the
    nearest end bin."""
    wide = np.concatenate(([-np.inf], part.edges[1:-1], [np.inf]))
    tmp = type(part)(part.theta_s, part.upsilon, wide, part.representatives, None, None, True)
    return init.bin_masses(tmp)


def cmd_compare(cfg, out, threads=1):
    out = Path(out)
    sc = make_scenario(cfg)
    write_common(out, cfg)
    steps = cfg.simulation.steps
    mc = mean_power_truth(sc, threads)
    init = initial_distribution(sc)
    X0 = discretize_initial(init, sc.partition)
    y_st, model = _stochastic_output(sc, X0, steps)
    y_base = baseline_output(sc, steps)
    header = ["t", "mc_mean_kW", "mc_stderr_kW", "stochastic_kW", "baseline_kW"]
    cols = [np.arange(steps + 1), mc.mean, mc.stderr, y_st, y_base]
    if cfg.reduction.enabled and isinstance(model, AggregateModel):
        full = eliminate_state(model.P, model.n_p, model.p_on)
        red = reduce_order(full, cfg.reduction.order, X0)
        header.append("reduced_kW")
        cols.append(red.step_response(X0, steps))
    write_csv(out / "trajectories.csv", header, cols)
    half = slice(steps // 2, None)
    rms = lambda y: math.sqrt(float(np.mean((y[half] - mc.mean[half]) ** 2)))
    summary = {"rms_stochastic_kW": rms(y_st), "rms_baseline_kW": rms(y_base)}
    if len(cols) > 5:
        summary["rms_reduced_kW"] = rms(cols[5])
    (out / "summary.txt").write_text("".join(f"{k}: {fmt(v)}\n" for k, v in summary.items()))
    write_bounds_txt(out, sc, X0 if sc.spec is None else None)
    return summary


def cmd_bounds(cfg, out, threads=1):
    out = Path(out)
    sc = make_scenario(cfg)
    write_common(out, cfg)
    p = sc.params
    if p.sigma <= 0:
        raise ValueError("bounds need sigma > 0")
    init = initial_distribution(sc)
    X0 = discretize_initial(init, sc.partition)
    write_bounds_txt(out, sc, X0)
    if sc.spec is not None and cfg.heterogeneity.mode == "clustering":
        cl = build_clustered_model(sc.spec, sc.partition, cfg.heterogeneity.n_clusters)
        h_a = lipschitz_constant(sc.spec, sc.partition, "empirical", "a")
        ups_a = cluster_diameter(cl, sc.spec, "a")
        lines = [f"h_a: {fmt(h_a)}", f"upsilon_a: {fmt(ups_a)}"]
        for N in cfg.bounds.horizons:
            if N >= 1:
                b = clustered_population_bound(cl, sc.partition, N, h_a, ups_a)
                lines.append(f"clustered_bound_kW_N{N}: {fmt(b)}")
        (out / "bounds_clustered.txt").write_text("\n".join(lines) + "\n")
    if cfg.bounds.empirical and sc.spec is None:
        checks = empirical_abstraction_error(p, sc.partition, cfg.bounds.horizons, sc.n_p,
                                             cfg.simulation.mc_runs, cfg.simulation.seed,
                                             init=init, threads=threads)
        write_csv(out / "bounds_empirical.csv",
                  ["N", "observed_kW", "mc_stderr_kW", "bound_kW", "holds"],
                  [[c.N for c in checks], [c.observed_kW for c in checks],
                   [c.mc_stderr_kW for c in checks], [c.bound_kW for c in checks],
                   [int(c.holds) for c in checks]])
        return checks


def averaged_switched_family(spec, partition, n_p, l_range=None) -> SwitchedControlModel:
    """Equal-weight average of the members' switched families."""
    uniq, counts = np.unique(spec.values, return_counts=True)
    w = counts / counts.sum()
    l = partition.l_steps if l_range is None else l_range
    sps = np.array([partition.grid_point(j) for j in range(-l, l + 1)])
    Ps = np.zeros((len(sps), partition.n_states, partition.n_states))
    p_on = 0.0
    for v, wk in zip(uniq, w):
        p = spec.params_for(v)
        G = gaussian_marginals(partition, p)
        for i, s in enumerate(sps):
            Ps[i] += wk * assemble_chain(G, partition, p.with_setpoint(float(s)))
        p_on += wk * p.P_rate_on
    return SwitchedControlModel(Ps, sps, l, int(n_p), p_on, partition, spec.base)


def reference_signal(cfg, base_power, steps) -> np.ndarray:
    ref = cfg.reference
    vals = np.asarray(ref.values, float)
    if ref.relative:
        vals = vals * base_power
    if ref.type == "constant":
        return np.full(steps + 1, vals[0])
    idx = np.minimum(np.arange(steps + 1) // ref.segment_steps, len(vals) - 1)
    return vals[idx]


def cmd_track(cfg, out, threads=1):
    out = Path(out)
    sc = make_scenario(cfg)
    write_common(out, cfg)
    ctl = cfg.control
    if sc.spec is None:
        fam = build_switched_family(sc.params, sc.partition, sc.n_p)
    elif cfg.heterogeneity.mode == "averaging":
        fam = averaged_switched_family(sc.spec, sc.partition, sc.n_p)
    else:
        raise ValueError("closed-loop tracking supports homogeneous or averaged populations")
    nominal = fam.chain(fam.nominal)
    init = cfg.population.init
    if init.type == "quasi-stationary":
        X0 = quasi_stationary(nominal)
    else:
        X0 = discretize_initial(initial_distribution(sc, nominal), sc.partition)
    base_power = float(fam.H @ quasi_stationary(nominal))
    steps = cfg.simulation.steps
    ref = reference_signal(cfg, base_power, steps)
    rl = None if ctl.rate_limit is None else rate_limit_steps(ctl.rate_limit, sc.partition.upsilon)
    kappa = None
    if ctl.kappa:
        kappa = np.zeros(sc.partition.n_states)
        kappa[sc.partition.n_bins:] = ctl.kappa
    res = closed_loop_run(fam, sc.population_params, ref, steps, cfg.simulation.seed,
                          controller=ctl.mode, horizon=ctl.horizon, rate_limit=rl,
                          kappa=kappa, rv_fraction=ctl.Rv_fraction, init=X0)
    write_csv(out / "trajectories.csv",
              ["t", "y_true_kW", "y_meas_kW", "y_est_kW", "y_des_kW", "theta_s_C"],
              [np.arange(steps + 1), res.y_true, res.y_meas, res.y_est, res.y_des, res.setpoint])
    write_bounds_txt(out, sc)
    return res


COMMANDS = {
    "simulate": cmd_simulate,
    "abstract": cmd_abstract,
    "compare": cmd_compare,
    "bounds": cmd_bounds,
    "track": cmd_track,
}
