"""Initial (mode, temperature) distributions.

Each distribution can be sampled to seed a concrete population and
discretized onto a partition to seed the abstract model, so both sides of
a comparison start from the same law.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr


@dataclass(frozen=True)
class PointMass:
    mode: int
    theta: float

    def sample(self, rng, size):
        return np.full(size, self.mode, np.int8), np.full(size, float(self.theta))

    def bin_masses(self, partition):
        p = np.zeros(partition.n_states)
        p[partition.index(self.mode, partition.bin_of(self.theta))] = 1.0
        return p


@dataclass(frozen=True)
class UniformBand:
    mode: int
    low: float
    high: float

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError(f"empty interval [{self.low}, {self.high}]")

    def sample(self, rng, size):
        return np.full(size, self.mode, np.int8), rng.uniform(self.low, self.high, size)

    def bin_masses(self, partition):
        edges = partition.edges
        lo = np.clip(edges[:-1], self.low, self.high)
        hi = np.clip(edges[1:], self.low, self.high)
        p = np.zeros(partition.n_states)
        off = self.mode * partition.n_bins
        p[off:off + partition.n_bins] = (hi - lo) / (self.high - self.low)
        return p


@dataclass(frozen=True)
class GaussianBand:
    mode: int
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("std must be positive")

    def sample(self, rng, size):
        return np.full(size, self.mode, np.int8), rng.normal(self.mean, self.std, size)

    def bin_masses(self, partition):
        p = np.zeros(partition.n_states)
        off = self.mode * partition.n_bins
        p[off:off + partition.n_bins] = gaussian_bin_masses(
            partition.edges, self.mean, self.std)
        return p


@dataclass(frozen=True)
class Histogram:
    """Occupancy vector over the bins of ``partition``.

    Sampling draws a bin, then a temperature uniformly inside it; the two
    unbounded bins sample their representative point.
    """

    masses: tuple
    partition: object

    def sample(self, rng, size):
        p = np.asarray(self.masses, float)
        p = np.clip(p, 0.0, None)
        p = p / p.sum()
        part = self.partition
        idx = rng.choice(part.n_states, size=size, p=p)
        modes = (idx // part.n_bins).astype(np.int8)
        bins = idx % part.n_bins
        lo = part.edges[bins]
        hi = part.edges[bins + 1]
        u = rng.uniform(size=size)
        theta = np.where(np.isfinite(lo) & np.isfinite(hi), lo + u * (hi - lo),
                         part.representatives[bins])
        return modes, theta

    def bin_masses(self, partition):
        if partition is not self.partition and partition != self.partition:
            raise ValueError("histogram defined on a different partition")
        return np.asarray(self.masses, float).copy()


@dataclass(frozen=True)
class Mixture:
    """Weighted mixture of the component distributions above."""

    weights: tuple
    components: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, float)
        if len(w) != len(self.components) or len(w) == 0:
            raise ValueError("weights and components must have equal non-zero length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must be non-negative and sum to 1, got {w.sum()}")

    def sample(self, rng, size):
        which = rng.choice(len(self.components), size=size, p=np.asarray(self.weights, float))
        modes = np.empty(size, np.int8)
        theta = np.empty(size)
        for k, comp in enumerate(self.components):
            sel = np.flatnonzero(which == k)
            if sel.size:
                modes[sel], theta[sel] = comp.sample(rng, sel.size)
        return modes, theta

    def bin_masses(self, partition):
        return sum(w * c.bin_masses(partition) for w, c in zip(self.weights, self.components))


def gaussian_bin_masses(edges, mean, std):
    """Mass of N(mean, std^2) in each interval ``[edges[k], edges[k+1])``.

    Upper-tail intervals are differenced on the complementary side so that
    small probabilities far from the mean keep their relative accuracy.
    """
    zl = (np.asarray(edges[:-1], float) - mean) / std
    zh = (np.asarray(edges[1:], float) - mean) / std
    upper = zl >= 0
    return np.where(upper, ndtr(-zl) - ndtr(-zh), ndtr(zh) - ndtr(zl))


def discretize_initial(pi0, partition) -> np.ndarray:
    """Probability mass of ``pi0`` on each abstract state of ``partition``."""
    p = pi0.bin_masses(partition)
    if np.any(p < -1e-15):
        raise ValueError("initial distribution has negative mass")
    total = p.sum()
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"initial distribution is not normalized (total {total!r})")
    return np.clip(p, 0.0, None)


def from_states(states: Sequence) -> tuple[np.ndarray, np.ndarray]:
    modes = np.array([s.mode for s in states], np.int8)
    theta = np.array([s.theta for s in states], float)
    return modes, theta
