"""Heterogeneous populations: averaged and clustered aggregate models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .aggregate import AggregateModel, gaussian_noise
from .chain import build_chain
from .params import TclParams


@dataclass(frozen=True, eq=False)
class HeterogeneitySpec:
    """Per-TCL values of one varied parameter on top of ``base``.

    ``bounds`` is the nominal range, used to lay out clusters; it defaults
    to the sample range.
    """

    parameter: str
    values: np.ndarray
    base: TclParams = field(default_factory=TclParams)
    bounds: tuple | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, float).ravel()
        if vals.size == 0:
            raise ValueError("heterogeneity spec has no samples")
        if not hasattr(self.base, self.parameter):
            raise ValueError(f"unknown parameter {self.parameter!r}")
        object.__setattr__(self, "values", vals)
        if self.bounds is None:
            object.__setattr__(self, "bounds", (float(vals.min()), float(vals.max())))
        for v in np.unique(vals):
            self.base.replace(**{self.parameter: float(v)})

    @classmethod
    def uniform(cls, parameter, lo, hi, n_p, rng, base=None):
        base = TclParams() if base is None else base
        return cls(parameter, rng.uniform(lo, hi, n_p), base, (float(lo), float(hi)))

    @property
    def n_p(self) -> int:
        return self.values.size

    def params_for(self, value) -> TclParams:
        return self.base.replace(**{self.parameter: float(value)})

    def param_list(self) -> list[TclParams]:
        return [self.params_for(v) for v in self.values]


class AveragedAggregateModel:
    """Equal-weight average of the members' chains.

    Mean dynamics use ``P_bar``. ``covariance(X)`` is the exact one-step
    covariance of the normalized occupancy when the population's parameter
    values are spread over its agents uniformly at random.

    ``member`` maps a distinct-member index to its transition matrix, so
    large populations never hold every chain in memory at once.
    """

    def __init__(self, member, weights, n_p, p_on_bar, partition=None):
        if n_p < 2:
            raise ValueError("averaging needs at least two TCLs")
        self._member = member
        self._weights = np.asarray(weights, float)
        self.n_p = int(n_p)
        self.p_on_bar = float(p_on_bar)
        self.partition = partition
        P_bar = None
        for k, w in enumerate(self._weights):
            P = member(k)
            P_bar = w * P if P_bar is None else P_bar + w * P
        self.P_bar = P_bar
        self._stack = None
        self._M = None

    @classmethod
    def from_matrices(cls, Ps, n_p=None, p_on_bar=1.0):
        """One matrix per TCL (repeats allowed)."""
        Ps = np.asarray(Ps, float)
        n = len(Ps) if n_p is None else n_p
        model = cls(lambda k: Ps[k], np.full(len(Ps), 1 / len(Ps)), n, p_on_bar)
        model._stack = Ps
        return model

    def members(self):
        """Distinct member chains with their weights."""
        if self._stack is None:
            self._stack = np.array([self._member(k) for k in range(len(self._weights))])
        return self._stack, self._weights

    def second_moment_rows(self) -> np.ndarray:
        """``M[r] = E[P_r P_r^T]`` over members, one matrix per source row."""
        if self._M is None:
            stack, w = self.members()
            self._M = np.einsum("k,kri,krj->rij", w, stack, stack, optimize=True)
        return self._M

    @property
    def aggregate(self) -> AggregateModel:
        return AggregateModel(self.P_bar, self.n_p, self.p_on_bar)

    @property
    def H(self):
        return self.aggregate.H

    def mean_step(self, X):
        return self.P_bar.T @ X

    def covariance(self, X, printed=False) -> np.ndarray:
        """One-step covariance of the normalized occupancy.

        ``printed=True`` drops the terms that come from the randomness of the
        parameter assignment itself; kept only for comparison.
        """
        X = np.asarray(X, float)
        n = self.n_p
        stack, w = self.members()
        mu = self.P_bar.T @ X
        EPDP = np.einsum("r,rij->ij", X, self.second_moment_rows())
        PDP = self.P_bar.T @ (X[:, None] * self.P_bar)
        if printed:
            S = (np.diag(mu) - EPDP) / n + (np.outer(mu, mu) - PDP) / (n - 1)
        else:
            V = np.einsum("kri,r->ki", stack, X)
            Evv = (V * w[:, None]).T @ V
            S = (np.diag(mu) / n + (np.outer(mu, mu) - PDP - Evv) / (n - 1)
                 + EPDP / (n * (n - 1)))
        return (S + S.T) / 2

    def step(self, X, noise_mode="mean-only", rng=None):
        if noise_mode == "mean-only":
            return self.mean_step(X)
        if noise_mode != "gaussian":
            raise ValueError("the averaged model supports mean-only and gaussian noise")
        return self.mean_step(X) + gaussian_noise(self.covariance(X), rng)


def build_averaged_model(spec: HeterogeneitySpec, partition) -> AveragedAggregateModel:
    if spec.n_p < 2:
        raise ValueError("averaging needs at least two TCLs")
    uniq, counts = np.unique(spec.values, return_counts=True)
    w = counts / counts.sum()
    p_on = sum(wk * spec.params_for(v).P_rate_on for v, wk in zip(uniq, w))
    model = AveragedAggregateModel(lambda k: build_chain(partition, spec.params_for(uniq[k])).P,
                                   w, spec.n_p, p_on, partition)
    model.spec = spec
    return model


@dataclass(frozen=True, eq=False)
class Cluster:
    alpha: float
    size: int
    model: AggregateModel
    members: np.ndarray
    spread: float
    params: TclParams = None


@dataclass(frozen=True, eq=False)
class ClusteredModel:
    clusters: list
    upsilon_a: float
    n_p: int

    @property
    def p_on_bar(self) -> float:
        return sum(c.size * c.model.p_on for c in self.clusters) / self.n_p

    def mean_output(self, X0, steps) -> np.ndarray:
        """Total power when every cluster starts from the same ``X0``."""
        y = np.zeros(steps + 1)
        for c in self.clusters:
            y += c.model.output(c.model.mean_trajectory(X0, steps))
        return y


def cluster_assignment(values, n_clusters, bounds):
    """Uniform bins over ``bounds``; a value on an inner edge joins the lower bin."""
    lo, hi = bounds
    if hi == lo:
        return np.zeros(len(values), int)
    edges = np.linspace(lo, hi, n_clusters + 1)
    idx = np.searchsorted(edges, values, side="left") - 1
    return np.clip(idx, 0, n_clusters - 1)


def build_clustered_model(spec: HeterogeneitySpec, partition, n_clusters: int) -> ClusteredModel:
    """Group TCLs into uniform parameter bins; each cluster is simulated as a
    homogeneous population at the middle of its members' range."""
    if n_clusters < 1:
        raise ValueError("n_clusters must be at least 1")
    idx = cluster_assignment(spec.values, n_clusters, spec.bounds)
    clusters = []
    for k in range(n_clusters):
        members = np.flatnonzero(idx == k)
        if members.size == 0:
            continue
        vals = spec.values[members]
        alpha = 0.5 * (vals.min() + vals.max())
        p = spec.params_for(alpha)
        model = AggregateModel(build_chain(partition, p).P, int(members.size), p.P_rate_on)
        clusters.append(Cluster(float(alpha), int(members.size), model, members,
                                float(vals.max() - vals.min()), p))
    ups_a = max(c.spread for c in clusters)
    return ClusteredModel(clusters, ups_a, spec.n_p)


def cluster_diameter(clustered: ClusteredModel, spec: HeterogeneitySpec, coordinate="a") -> float:
    """Largest within-cluster spread, measured in ``a`` or the raw parameter."""
    worst = 0.0
    for c in clustered.clusters:
        coords = _coordinate(spec, spec.values[c.members], coordinate)
        worst = max(worst, float(coords.max() - coords.min()))
    return worst


def lambda_constant(params: TclParams) -> float:
    rp = params.R * params.P_rate
    return rp + abs(2 * (params.theta_s - params.theta_a) + rp)


def closed_form_lipschitz(params: TclParams, partition) -> float:
    """Lipschitz constant of the chain rows in the parameter ``a``."""
    return (partition.big_L + lambda_constant(params)) / (params.sigma * math.sqrt(2 * math.pi))


def _coordinate(spec, values, coordinate):
    if coordinate == "a":
        return np.array([spec.params_for(v).a for v in values])
    return np.asarray(values, float)


def lipschitz_constant(spec: HeterogeneitySpec, partition, mode="empirical",
                       coordinate="a", max_values=40) -> float:
    """Lipschitz constant ``h_a`` of ``alpha -> P(alpha)`` in the induced
    infinity norm.

    ``coordinate`` is ``"a"`` (the decay factor) or ``"raw"`` (the varied
    parameter itself). Above ``max_values`` distinct values only
    neighbouring pairs in sorted order are compared.
    """
    if mode == "closed-form-capacitance":
        if spec.parameter != "C":
            raise ValueError("closed form applies only when C is the varied parameter")
        return closed_form_lipschitz(spec.base, partition)
    if mode != "empirical":
        raise ValueError(f"unknown mode {mode!r}")
    uniq = np.unique(spec.values)
    if uniq.size < 2:
        return 0.0
    coords = _coordinate(spec, uniq, coordinate)
    Ps = [build_chain(partition, spec.params_for(v)).P for v in uniq]
    if uniq.size <= max_values:
        pairs = [(i, j) for i in range(uniq.size) for j in range(i + 1, uniq.size)]
    else:
        order = np.argsort(coords)
        pairs = list(zip(order[:-1], order[1:]))
    best = 0.0
    for i, j in pairs:
        d = abs(coords[i] - coords[j])
        if d == 0:
            continue
        best = max(best, np.abs(Ps[i] - Ps[j]).sum(axis=1).max() / d)
    return float(best)
