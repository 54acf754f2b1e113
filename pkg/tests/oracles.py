"""Independent reference computations used by the tests."""

import itertools
import math

import numpy as np


def phi_cdf(x):
    """Standard normal CDF from the C library's erfc."""
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def interval_mass(lo, hi, mu, sd):
    # difference on the side of the smaller tail keeps relative accuracy
    if lo >= mu:
        return phi_cdf(-(lo - mu) / sd) - phi_cdf(-(hi - mu) / sd)
    return phi_cdf((hi - mu) / sd) - phi_cdf((lo - mu) / sd)


def next_count_law(rows):
    """Exact law of the next occupancy counts when agent ``k`` jumps with
    probability vector ``rows[k]``. Returns {counts tuple: probability}."""
    law = {}
    n = len(rows[0])
    for targets in itertools.product(range(n), repeat=len(rows)):
        p = 1.0
        for k, j in enumerate(targets):
            p *= rows[k][j]
        if p == 0.0:
            continue
        counts = tuple(np.bincount(targets, minlength=n))
        law[counts] = law.get(counts, 0.0) + p
    return law


def law_moments(law, scale=1.0):
    keys = np.array(list(law), float) / scale
    probs = np.array(list(law.values()))
    mean = probs @ keys
    cov = (keys - mean).T @ ((keys - mean) * probs[:, None])
    return mean, cov


def mixture_moments(laws, scale):
    """Moments of an equal-weight mixture of count laws."""
    merged = {}
    for law in laws:
        for k, p in law.items():
            merged[k] = merged.get(k, 0.0) + p / len(laws)
    return law_moments(merged, scale)


def agent_states(counts):
    return [r for r, c in enumerate(counts) for _ in range(c)]


def homogeneous_moments(P, counts):
    states = agent_states(counts)
    n_p = len(states)
    return law_moments(next_count_law([P[s] for s in states]), n_p)


def heterogeneous_moments(Ps, counts):
    """Agents located per ``counts``; the parameter values (one matrix per
    agent in ``Ps``) are dealt to the agents in every order with equal
    weight."""
    states = agent_states(counts)
    n_p = len(states)
    laws = []
    for perm in itertools.permutations(range(n_p)):
        laws.append(next_count_law([Ps[perm[k]][s] for k, s in enumerate(states)]))
    return mixture_moments(laws, n_p)


def random_stochastic(rng, n, zeros=0.0):
    P = rng.random((n, n))
    if zeros:
        P[rng.random((n, n)) < zeros] = 0.0
        P[np.arange(n), rng.integers(0, n, n)] += 0.1
    return P / P.sum(axis=1, keepdims=True)


def random_simplex(rng, n):
    x = rng.exponential(size=n)
    return x / x.sum()
