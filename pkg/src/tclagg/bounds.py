"""Value functions on the chain and abstraction-error bounds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import ndtr

from .aggregate import AggregateModel
from .chain import build_chain
from .heterogeneity import lambda_constant
from .initial import PointMass, discretize_initial
from .population import mc_expected_power

SQRT_2PI = math.sqrt(2 * math.pi)


def target_mask(partition, params) -> np.ndarray:
    """States whose next mode is ON: ``{1} x [theta-, inf)`` and
    ``{0} x [theta+, inf)``, decided at the bin representatives."""
    reps = partition.representatives
    n = partition.n_bins
    mask = np.zeros(2 * n, bool)
    mask[:n] = reps >= params.theta_plus
    mask[n:] = reps >= params.theta_minus
    return mask


@dataclass
class ValueFunctionTable:
    W: np.ndarray  # W[k-1] is W_k, k = 1..N
    target: np.ndarray

    @property
    def N(self) -> int:
        return len(self.W)

    def __getitem__(self, k):
        return self.W[k - 1]


def chain_value_functions(chain, N: int, pin: bool = True) -> ValueFunctionTable:
    """``W_N = 1_A`` and ``W_k = P W_{k+1}``; ``W_1`` estimates ``E[m(N)]``.

    With ``pin`` the low unbounded bins are held at 0 and the high ones at 1.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    part = chain.partition
    n = part.n_bins
    A = target_mask(part, chain.params)
    W = np.empty((N, 2 * n))
    W[N - 1] = A
    for k in range(N - 2, -1, -1):
        W[k] = chain.P @ W[k + 1]
        if pin and part.absorbing:
            W[k, [0, n]] = 0.0
            W[k, [n - 1, 2 * n - 1]] = 1.0
    return ValueFunctionTable(W, A)


@dataclass
class BoundParams:
    gamma: float
    lam: float
    epsilon: float
    q_exact: float
    vacuous: bool


def compute_bound_params(params, partition, N: int) -> BoundParams:
    """Tail parameter of the truncation error.

    ``epsilon = phi(gamma)/gamma`` certifies ``Q(gamma)``; the exact
    ``Q(gamma)`` is returned alongside. ``gamma <= 0`` is flagged vacuous.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if params.sigma <= 0:
        raise ValueError("bounds need sigma > 0")
    a = params.a
    aN = a ** N
    lam = lambda_constant(params)
    gamma = (1 - a) / (2 * params.sigma) * ((aN * partition.big_L + params.delta) / (1 - aN) - lam)
    if gamma > 0:
        eps = math.exp(-gamma * gamma / 2) / (gamma * SQRT_2PI)
        return BoundParams(gamma, lam, eps, float(ndtr(-gamma)), False)
    return BoundParams(gamma, lam, math.nan, float(ndtr(-gamma)), True)


@dataclass
class BoundReport:
    gamma: float
    lam: float
    epsilon: float
    q_exact: float
    vacuous: bool
    N: int
    n_p: int
    lipschitz_term: float
    single_tcl_bound: float
    population_bound_kW: float
    local_error: np.ndarray
    tightened_bound_kW: float | None = None

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if k == "local_error":
                v = f"[{len(v)} entries, max {np.max(v):.12g}]"
            elif isinstance(v, float):
                v = "%.12g" % v
            lines.append(f"{k}: {v}")
        return "\n".join(lines) + "\n"


def single_tcl_bound(N, epsilon, lipschitz_term) -> float:
    eps_term = 0.0 if N <= 2 else (N - 2) / 2 * epsilon
    return (N - 1) * (eps_term + lipschitz_term)


def local_error_vector(chain, N, epsilon, lipschitz_term) -> np.ndarray:
    """``E_1`` from ``E_k = E + P E_{k+1}``, ``E_N = 0``."""
    n = chain.n_bins
    E = np.full(chain.n_states, lipschitz_term)
    E[[0, n - 1, n, 2 * n - 1]] = epsilon
    Ek = np.zeros(chain.n_states)
    for _ in range(N - 1):
        Ek = E + chain.P @ Ek
    return Ek


def homogeneous_population_bound(params, partition, N: int, n_p: int, X0=None,
                                 chain=None) -> BoundReport:
    """Bound on ``|E[y(N)] - E[y_abs(N)]|`` in kW for ``n_p`` identical TCLs."""
    bp = compute_bound_params(params, partition, N)
    a = params.a
    lip = 2 * a * partition.upsilon / (params.sigma * SQRT_2PI)
    eps = bp.epsilon if not bp.vacuous else math.inf
    single = single_tcl_bound(N, eps, lip)
    pop = n_p * params.P_rate_on * single
    if chain is None:
        chain = build_chain(partition, params)
    E1 = local_error_vector(chain, N, eps if math.isfinite(eps) else 1.0, lip)
    tight = None
    if X0 is not None:
        tight = float(n_p * params.P_rate_on * (E1 @ np.asarray(X0)))
    return BoundReport(bp.gamma, bp.lam, bp.epsilon, bp.q_exact, bp.vacuous, N, n_p,
                       lip, single, pop, E1, tight)


def clustered_population_bound(clustered, partition, N, h_a, upsilon_a=None, base=None) -> float:
    """Worst homogeneous bound over the cluster representatives plus the
    clustering term ``n_p (P_on_bar (N-1) h_a + 1) upsilon_a``.

    ``upsilon_a`` must be measured in the same coordinate as ``h_a``; it
    defaults to the clustered model's diameter.
    """
    ups_a = clustered.upsilon_a if upsilon_a is None else upsilon_a
    worst = 0.0
    for c in clustered.clusters:
        p = c.params
        worst = max(worst, homogeneous_population_bound(p, partition, N, clustered.n_p).population_bound_kW)
    return worst + clustered.n_p * (clustered.p_on_bar * (N - 1) * h_a + 1) * ups_a


@dataclass
class EmpiricalCheck:
    N: int
    observed_kW: float
    mc_stderr_kW: float
    bound_kW: float
    mc_mean_kW: float
    abs_kW: float

    @property
    def holds(self) -> bool:
        return self.observed_kW <= self.bound_kW + 3 * self.mc_stderr_kW


def empirical_abstraction_error(params, partition, horizons, n_p, runs, seed,
                                init=None, threads=1) -> list[EmpiricalCheck]:
    """Monte Carlo mean power against the chain prediction at each ``N``."""
    init = PointMass(0, params.theta_s) if init is None else init
    horizons = list(horizons)
    steps = max(max(horizons), 1)
    mc = mc_expected_power(init, params, steps, runs, seed, n_p=n_p, threads=threads)
    chain = build_chain(partition, params)
    model = AggregateModel.from_chain(chain, n_p)
    X0 = discretize_initial(init, partition)
    y_abs = model.output(model.mean_trajectory(X0, steps))
    out = []
    for N in horizons:
        if N == 0:
            bound = 0.0
        else:
            bound = homogeneous_population_bound(params, partition, max(N, 1), n_p,
                                                 chain=chain).population_bound_kW
        out.append(EmpiricalCheck(N, abs(mc.mean[N] - y_abs[N]), float(mc.stderr[N]),
                                  bound, float(mc.mean[N]), float(y_abs[N])))
    return out


def write_sweep_csv(path, reports):
    keys = ["N", "n_p", "gamma", "lam", "epsilon", "q_exact", "vacuous",
            "lipschitz_term", "single_tcl_bound", "population_bound_kW"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in reports:
            row = []
            for k in keys:
                v = getattr(r, k)
                row.append("%.12g" % v if isinstance(v, float) else v)
            w.writerow(row)
