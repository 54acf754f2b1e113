"""State elimination and balanced truncation of the aggregate model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import NumericalGuardError


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """``x' = A x + B u``, ``y = C x + D u`` driven by the unit step ``u = 1``.

    ``T_in`` maps a full occupancy vector to this model's state, so both
    models can start from the same initial condition.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    T_in: np.ndarray
    hankel: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_marginal: int = 0

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def initial_state(self, X0) -> np.ndarray:
        return self.T_in @ np.asarray(X0, float)

    def step_response(self, X0, steps) -> np.ndarray:
        x = self.initial_state(X0)
        B = self.B.ravel()
        C = self.C.ravel()
        y = np.empty(steps + 1)
        for t in range(steps + 1):
            y[t] = C @ x + self.D
            x = self.A @ x + B
        return y


def eliminate_state(P, n_p=1, p_on=1.0) -> ReducedModel:
    """Drop the last coordinate using ``sum(X) = 1``.

    The output is scaled by ``n_p * p_on`` so it is a power in kW.
    """
    P = np.asarray(P, float)
    k = P.shape[0] - 1
    n = (k + 1) // 2
    om11 = P[:k, :k]
    om21 = P[k, :k]
    A = (om11 - np.outer(np.ones(k), om21)).T
    B = om21.reshape(k, 1)
    scale = n_p * p_on
    C = np.zeros((1, k))
    C[0, :n] = -scale
    T_in = np.eye(k, k + 1)
    return ReducedModel(A, B, C, float(scale), T_in)


def _split_marginal(A, tol):
    """Similarity that block-diagonalizes ``A`` into |lambda| < 1 - tol and
    the rest. Returns ``(V, Vinv, k_stable)``."""
    T, Z, k = linalg.schur(A, output="real",
                           sort=lambda re, im: np.hypot(re, im) < 1 - tol)
    m = A.shape[0]
    if k in (0, m):
        return Z, Z.T, k
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    X = linalg.solve_sylvester(T11, -T22, -T12)
    S = np.eye(m)
    S[:k, k:] = X
    Sinv = np.eye(m)
    Sinv[:k, k:] = -X
    return Z @ S, Sinv @ Z.T, k


def _psd_sqrt(W):
    w, V = np.linalg.eigh((W + W.T) / 2)
    return V * np.sqrt(np.clip(w, 0.0, None))


def hankel_singular_values(A, B, C):
    Wc = linalg.solve_discrete_lyapunov(A, B @ B.T)
    Wo = linalg.solve_discrete_lyapunov(A.T, C.T @ C)
    Lc, Lo = _psd_sqrt(Wc), _psd_sqrt(Wo)
    U, s, Vt = np.linalg.svd(Lo.T @ Lc)
    return Lc, Lo, U, s, Vt


def reduce_order(full: ReducedModel, k: int, X0=None,
                 marginal_tol: float = 1e-9) -> ReducedModel:
    """Balanced truncation to total order ``k``.

    Modes on the unit circle (absorbing mass) are split off and kept
    exactly; the strictly stable part is truncated by the square-root
    method. Hankel singular values of the stable part are reported.

    The step input of the aggregate model only feeds the absorbing cells,
    so the transient is an initial-condition response. Occupancy vectors in
    ``X0`` (one per row) are therefore treated as extra impulse inputs when
    forming the controllability Gramian.
    """
    A, B, C = full.A, full.B, full.C
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rho > 1 + marginal_tol:
        raise NumericalGuardError(f"unstable model, spectral radius {rho:.6g}")
    if not 1 <= k <= full.order:
        raise ValueError(f"target order must be in [1, {full.order}]")
    V, Vinv, ks = _split_marginal(A, marginal_tol)
    nu = full.order - ks
    if k < nu:
        raise ValueError(f"order {k} below the {nu} marginal modes that must be kept")
    At = Vinv @ A @ V
    Bt = Vinv @ B
    Ct = C @ V
    As, Bs, Cs = At[:ks, :ks], Bt[:ks], Ct[:, :ks]
    proj = Vinv @ full.T_in
    if X0 is not None:
        Z0 = proj[:ks] @ np.atleast_2d(np.asarray(X0, float)).T
        Bs_gram = np.hstack([Bs, Z0])
    else:
        Bs_gram = Bs
    r = k - nu
    if ks:
        Lc, Lo, U, s, Vt = hankel_singular_values(As, Bs_gram, Cs)
    else:
        s = np.zeros(0)
    if r == ks:
        Tr, Tl = np.eye(ks), np.eye(ks)
    else:
        s_r = s[:r]
        if r and s_r[-1] <= 0:
            raise NumericalGuardError("zero Hankel singular value inside the kept order")
        inv_sqrt = 1.0 / np.sqrt(s_r)
        Tr = Lc @ Vt[:r].T * inv_sqrt
        Tl = (inv_sqrt[:, None] * U[:, :r].T) @ Lo.T
    Ar = np.zeros((k, k))
    Ar[:r, :r] = Tl @ As @ Tr
    Ar[r:, r:] = At[ks:, ks:]
    Br = np.vstack([Tl @ Bs, Bt[ks:]])
    Cr = np.hstack([Cs @ Tr, Ct[:, ks:]])
    T_in = np.vstack([Tl @ proj[:ks], proj[ks:]])
    return ReducedModel(Ar, Br, Cr, full.D, T_in, s, nu)


def truncation_bound(model: ReducedModel, k_stable: int) -> float:
    """Twice the tail sum of the discarded Hankel singular values."""
    return 2.0 * float(np.sum(model.hankel[k_stable:]))
