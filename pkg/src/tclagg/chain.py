"""Temperature partitions and the finite Markov chain of a single TCL."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, fields

import numpy as np

from .initial import gaussian_bin_masses
from .params import TclParams, switch

log = logging.getLogger(__name__)

ROW_TOL = 1e-9
RENORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TemperaturePartition:
    """Uniform grid around the set-point with two unbounded end bins.

    Bin ``i`` covers ``[edges[i], edges[i+1])``; state ``mode*n_bins + i``.
    For the stochastic chain ``edges[0] = -inf`` and ``edges[-1] = +inf``
    and those two bins are absorbing.
    """

    theta_s: float
    upsilon: float
    edges: np.ndarray
    representatives: np.ndarray
    l_steps: int | None = None
    m_steps: int | None = None
    absorbing: bool = True

    @property
    def n_bins(self) -> int:
        return len(self.edges) - 1

    @property
    def n_states(self) -> int:
        return 2 * self.n_bins

    @property
    def big_L(self) -> float:
        return 2 * self.m_steps * self.upsilon

    @property
    def boundaries(self) -> np.ndarray:
        """Finite grid points, lowest to highest."""
        return self.edges[np.isfinite(self.edges)]

    def index(self, mode, bin_):
        return mode * self.n_bins + bin_

    def bin_of(self, theta):
        b = np.searchsorted(self.edges, theta, side="right") - 1
        b = np.clip(b, 0, self.n_bins - 1)
        return int(b) if np.ndim(b) == 0 else b

    def grid_point(self, k: int) -> float:
        """Boundary ``theta_s + k*upsilon``."""
        return self.theta_s + k * self.upsilon

    def on_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_states, bool)
        mask[self.n_bins:] = True
        return mask

    def histogram(self, modes, thetas) -> np.ndarray:
        """Normalized occupancy of a concrete population."""
        idx = self.index(np.asarray(modes, int), self.bin_of(np.asarray(thetas, float)))
        counts = np.bincount(np.atleast_1d(idx), minlength=self.n_states)
        return counts / counts.sum()

    def __eq__(self, other):
        if not isinstance(other, TemperaturePartition):
            return NotImplemented
        return (self.l_steps == other.l_steps and self.m_steps == other.m_steps
                and self.absorbing == other.absorbing
                and np.array_equal(self.edges, other.edges))

    def __hash__(self):
        return hash((self.l_steps, self.m_steps, self.absorbing, self.edges.tobytes()))


def build_partition(params: TclParams, l_steps: int, m_steps: int) -> TemperaturePartition:
    if not (isinstance(l_steps, (int, np.integer)) and isinstance(m_steps, (int, np.integer))):
        raise TypeError("l_steps and m_steps must be integers")
    if not 0 < l_steps < m_steps:
        raise ValueError(f"need 0 < l < m, got l={l_steps}, m={m_steps}")
    ups = params.delta / (2 * l_steps)
    ks = np.arange(-m_steps, m_steps + 1)
    inner = params.theta_s + ks * ups
    edges = np.concatenate(([-np.inf], inner, [np.inf]))
    reps = np.empty(len(edges) - 1)
    reps[1:-1] = 0.5 * (inner[:-1] + inner[1:])
    reps[0] = inner[0] - ups / 2
    reps[-1] = inner[-1] + ups / 2
    return TemperaturePartition(params.theta_s, ups, edges, reps, int(l_steps), int(m_steps), True)


def build_deadband_partition(params: TclParams, n_d: int) -> TemperaturePartition:
    """``n_d`` equal bins covering the dead-band only (no absorbing bins)."""
    if n_d < 2:
        raise ValueError("n_d must be at least 2")
    edges = np.linspace(params.theta_minus, params.theta_plus, n_d + 1)
    reps = 0.5 * (edges[:-1] + edges[1:])
    return TemperaturePartition(params.theta_s, params.delta / n_d, edges, reps,
                                None, None, False)


@dataclass(frozen=True, eq=False)
class MarkovChainModel:
    P: np.ndarray
    partition: TemperaturePartition
    params: TclParams
    kind: str = "stochastic"

    @property
    def n_bins(self) -> int:
        return self.partition.n_bins

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    def bin_index(self, mode, bin_):
        return self.partition.index(mode, bin_)

    def next_modes(self) -> np.ndarray:
        """Mode each state's mass moves into, per the switching rule."""
        return next_modes(self.partition, self.params)


def params_hash(params: TclParams) -> str:
    vals = tuple((f.name, getattr(params, f.name)) for f in fields(params) if f.compare)
    return hashlib.sha256(repr(vals).encode()).hexdigest()[:16]


def next_modes(partition, params) -> np.ndarray:
    reps = partition.representatives
    out = np.empty(partition.n_states, np.int8)
    for m in (0, 1):
        out[m * partition.n_bins:(m + 1) * partition.n_bins] = switch(
            m, reps, params.theta_minus, params.theta_plus)
    return out


def gaussian_marginals(partition: TemperaturePartition, params: TclParams) -> np.ndarray:
    """``G[m, i, j]``: probability of landing in bin ``j`` from the
    representative of bin ``i`` with mode ``m`` held for the step.

    Does not depend on the set-point, so a switched family can share it.
    """
    if params.sigma <= 0:
        raise ValueError("the stochastic chain needs sigma > 0; use the deterministic baseline")
    n = partition.n_bins
    G = np.empty((2, n, n))
    for m in (0, 1):
        mu = params.mean_next(partition.representatives, m)
        for i in range(n):
            G[m, i] = gaussian_bin_masses(partition.edges, mu[i], params.sigma)
    return G


def assemble_chain(G, partition, params, absorbing=True) -> np.ndarray:
    """Place each row's marginal in the column block of its next mode."""
    n = partition.n_bins
    P = np.zeros((2 * n, 2 * n))
    nm = next_modes(partition, params)
    for m in (0, 1):
        for i in range(n):
            r = m * n + i
            off = int(nm[r]) * n
            if absorbing and partition.absorbing and i in (0, n - 1):
                P[r, off + i] = 1.0
            else:
                P[r, off:off + n] = G[m, i]
    _check_rows(P)
    return P


def _check_rows(P):
    defect = np.abs(P.sum(axis=1) - 1.0)
    worst = float(defect.max())
    if worst > ROW_TOL:
        raise ArithmeticError(f"row-sum defect {worst:.3e} exceeds {ROW_TOL}")
    if worst > RENORM_TOL:
        log.warning("renormalizing rows, max defect %.3e", worst)
        P /= P.sum(axis=1, keepdims=True)


def build_chain(partition: TemperaturePartition, params: TclParams,
                absorbing: bool = True) -> MarkovChainModel:
    """Stochastic chain on ``partition``.

    The switching rule is evaluated at the bin representative. The two
    unbounded bins keep their temperature cell but still obey the switching
    rule, so the low cell drains into OFF and the high cell into ON.
    ``absorbing=False`` gives those bins ordinary Gaussian rows instead.
    """
    G = gaussian_marginals(partition, params)
    return MarkovChainModel(assemble_chain(G, partition, params, absorbing),
                            partition, params, "stochastic")


def build_deterministic_baseline(params: TclParams, n_d: int,
                                 method: str = "overlap") -> MarkovChainModel:
    """Dead-band-only chain moving mass along the noiseless dynamics.

    ``method="representative"`` sends each bin's whole mass to the bin that
    contains the image of its midpoint (0/1 rows). ``method="overlap"``
    spreads the mass uniformly over the image interval of the whole bin.
    Mass leaving the dead-band goes to the nearest bin of the other mode.
    """
    part = build_deadband_partition(params, n_d)
    n = n_d
    P = np.zeros((2 * n, 2 * n))
    lo_db, hi_db = params.theta_minus, params.theta_plus
    for m in (0, 1):
        other = 1 - m
        # OFF warms and exits at the top; ON cools and exits at the bottom
        exit_col = other * n + (n - 1 if m == 0 else 0)
        for i in range(n):
            r = m * n + i
            if method == "representative":
                t = params.mean_next(part.representatives[i], m)
                if t < lo_db or t > hi_db:
                    P[r, exit_col] = 1.0
                else:
                    P[r, m * n + part.bin_of(t)] = 1.0
            elif method == "overlap":
                a0 = params.mean_next(part.edges[i], m)
                a1 = params.mean_next(part.edges[i + 1], m)
                lo, hi = min(a0, a1), max(a0, a1)
                width = hi - lo
                inside_lo = np.clip(part.edges[:-1], lo, hi)
                inside_hi = np.clip(part.edges[1:], lo, hi)
                frac = (inside_hi - inside_lo) / width
                P[r, m * n:(m + 1) * n] = frac
                P[r, exit_col] += max(0.0, 1.0 - frac.sum())
            else:
                raise ValueError(f"unknown baseline method {method!r}")
    _check_rows(P)
    return MarkovChainModel(P, part, params, f"deterministic-{method}")


def structure_violations(chain: MarkovChainModel) -> int:
    """Count nonzero entries outside each row's next-mode column block."""
    n = chain.n_bins
    nm = chain.next_modes() if chain.kind == "stochastic" else None
    bad = 0
    for r in range(chain.n_states):
        row = chain.P[r]
        if nm is None:
            continue
        keep = slice(int(nm[r]) * n, (int(nm[r]) + 1) * n)
        mask = np.ones(chain.n_states, bool)
        mask[keep] = False
        bad += int(np.count_nonzero(row[mask]))
    return bad


def stationary_distribution(P) -> np.ndarray:
    """Left Perron vector of a row-stochastic ``P`` normalized to sum 1."""
    w, V = np.linalg.eig(P.T)
    k = int(np.argmin(np.abs(w - 1.0)))
    v = np.real(V[:, k])
    return v / v.sum()


def quasi_stationary(chain: MarkovChainModel) -> np.ndarray:
    """Leading left eigenvector of the chain restricted to interior bins.

    A natural "settled" occupancy for a population that has not leaked into
    the absorbing cells.
    """
    n = chain.n_bins
    interior = np.ones(chain.n_states, bool)
    for m in (0, 1):
        interior[m * n] = interior[m * n + n - 1] = False
    Q = chain.P[np.ix_(interior, interior)]
    w, V = np.linalg.eig(Q.T)
    k = int(np.argmax(np.real(w)))
    v = np.abs(np.real(V[:, k]))
    x = np.zeros(chain.n_states)
    x[interior] = v / v.sum()
    return x


def export_chain(chain: MarkovChainModel, path) -> None:
    """Header line ``# n=.. l=.. m=.. params=<hash>`` then one CSV row per state."""
    part = chain.partition
    header = (f"n={part.n_bins} l={part.l_steps} m={part.m_steps} "
              f"params={params_hash(chain.params)} kind={chain.kind}")
    np.savetxt(path, chain.P, delimiter=",", fmt="%.17g", header=header)


def import_chain(path, partition, params) -> MarkovChainModel:
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
    meta = dict(item.split("=", 1) for item in header)
    if int(meta["n"]) != partition.n_bins:
        raise ValueError("matrix file does not match the partition size")
    if meta["params"] != params_hash(params):
        raise ValueError("matrix file was built for different parameters")
    P = np.loadtxt(path, delimiter=",", ndmin=2)
    if P.shape != (partition.n_states, partition.n_states):
        raise ValueError(f"bad matrix shape {P.shape}")
    return MarkovChainModel(P, partition, params, meta.get("kind", "stochastic"))


def expected_on_probability(chain: MarkovChainModel, state: int, steps: int = 1) -> float:
    e = np.zeros(chain.n_states)
    e[state] = 1.0
    for _ in range(steps):
        e = e @ chain.P
    return float(e[chain.n_bins:].sum())


def rate_limit_steps(limit_celsius: float, upsilon: float) -> int:
    """Grid steps per move allowed by a temperature rate bound."""
    return int(math.ceil(limit_celsius / upsilon - 1e-9))
