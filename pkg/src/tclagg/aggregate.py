"""Aggregated occupancy dynamics ``X(t+1) = P^T X(t) + W(t)``."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

NOISE_MODES = ("mean-only", "gaussian", "exact-multinomial")


def hadamard_map(C, D):
    """``R(C, D) = (C*C) @ D - (C @ D)**2`` with entrywise squares."""
    C = np.atleast_2d(C)
    return (C * C) @ D - (C @ D) ** 2


def sigma_of_X(X, P, n_p) -> np.ndarray:
    """Covariance of the one-step noise given occupancy ``X``."""
    X = np.asarray(X, float)
    S = np.diag(P.T @ X) - P.T @ (X[:, None] * P)
    S = (S + S.T) / 2
    return S / n_p


def quadratic_form_identity(nu, X, P, n_p):
    """Return ``(nu' Sigma(X) nu, R(nu', P') X / n_p)``."""
    nu = np.asarray(nu, float)
    lhs = float(nu @ sigma_of_X(X, P, n_p) @ nu)
    rhs = float(hadamard_map(nu[None, :], P.T)[0] @ X) / n_p
    return lhs, rhs


def default_noise_mode(n_p: int) -> str:
    return "gaussian" if n_p >= 1000 else "exact-multinomial"


def apportion(X, n_p) -> np.ndarray:
    """Integer counts summing to ``n_p`` by largest remainder."""
    raw = np.clip(np.asarray(X, float), 0, None) * n_p
    base = np.floor(raw).astype(np.int64)
    short = int(n_p - base.sum())
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    elif short < 0:
        order = np.argsort(raw - base, kind="stable")
        for k in order:
            if short == 0:
                break
            if base[k] > 0:
                base[k] -= 1
                short += 1
    return base


def gaussian_noise(S, rng) -> np.ndarray:
    w, V = np.linalg.eigh(S)
    w = np.clip(w, 0.0, None)
    z = rng.standard_normal(len(w))
    W = V @ (np.sqrt(w) * z)
    # remove rounding drift along the all-ones direction
    return W - W.mean()


def aggregate_step(X, P, n_p, noise_mode="mean-only", rng=None, sigma=None) -> np.ndarray:
    """One step of the aggregate model.

    ``sigma`` overrides the noise covariance (used by the averaged
    heterogeneous model); otherwise it is ``sigma_of_X(X, P, n_p)``.
    """
    X = np.asarray(X, float)
    mean = P.T @ X
    if noise_mode == "mean-only":
        return mean
    if rng is None:
        raise ValueError("a random generator is required for noisy steps")
    if noise_mode == "gaussian":
        S = sigma_of_X(X, P, n_p) if sigma is None else sigma
        return mean + gaussian_noise(S, rng)
    if noise_mode == "exact-multinomial":
        counts = apportion(X, n_p)
        src = np.flatnonzero(counts)
        draws = rng.multinomial(counts[src], P[src])
        return draws.sum(axis=0) / n_p
    raise ValueError(f"unknown noise mode {noise_mode!r}")


@dataclass(frozen=True, eq=False)
class AggregateModel:
    """Occupancy model of ``n_p`` identical TCLs sharing ``P``."""

    P: np.ndarray
    n_p: int
    p_on: float

    @classmethod
    def from_chain(cls, chain, n_p):
        if n_p < 1:
            raise ValueError("n_p must be positive")
        return cls(chain.P, int(n_p), chain.params.P_rate_on)

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def H(self) -> np.ndarray:
        n = self.n_states // 2
        h = np.zeros(self.n_states)
        h[n:] = self.n_p * self.p_on
        return h

    def output(self, X):
        return np.asarray(X) @ self.H

    def sigma(self, X):
        return sigma_of_X(X, self.P, self.n_p)

    def step(self, X, noise_mode="mean-only", rng=None):
        return aggregate_step(X, self.P, self.n_p, noise_mode, rng)

    def mean_trajectory(self, X0, steps) -> np.ndarray:
        out = np.empty((steps + 1, self.n_states))
        out[0] = X0
        PT = self.P.T
        for t in range(steps):
            out[t + 1] = PT @ out[t]
        return out

    def simulate(self, X0, steps, noise_mode="mean-only", rng=None) -> np.ndarray:
        out = np.empty((steps + 1, self.n_states))
        out[0] = X0
        for t in range(steps):
            out[t + 1] = self.step(out[t], noise_mode, rng)
        return out


def write_trajectory_csv(path, y, X=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["t", "y_abs_kW"]
        if X is not None:
            head += [f"X_{i + 1}" for i in range(X.shape[1])]
        w.writerow(head)
        for t, yt in enumerate(y):
            row = [t, "%.12g" % yt]
            if X is not None:
                row += ["%.12g" % v for v in X[t]]
            w.writerow(row)
