"""Set-point control of the aggregate model.

The control input is a set-point index ``k`` in ``0..2l``; index ``k`` puts
the dead-band centre at ``theta_s + (k - l) * upsilon`` on the fixed grid.
State matrices are ``F_k = P_k^T``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .aggregate import hadamard_map, sigma_of_X
from .chain import assemble_chain, gaussian_marginals, quasi_stationary, MarkovChainModel
from .errors import NumericalGuardError
from .initial import Histogram
from .population import MEASUREMENT, INITIAL_STATE, Population, PopulationSnapshot, stream

MAX_SCHEDULES = 10**6
TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SwitchedControlModel:
    Ps: np.ndarray
    setpoints: np.ndarray
    nominal: int
    n_p: int
    p_on: float
    partition: object = None
    params: object = None

    @property
    def size(self) -> int:
        return len(self.Ps)

    @property
    def n_states(self) -> int:
        return self.Ps.shape[1]

    @property
    def H(self) -> np.ndarray:
        h = np.zeros(self.n_states)
        h[self.n_states // 2:] = self.n_p * self.p_on
        return h

    def F(self, k) -> np.ndarray:
        return self.Ps[k].T

    def chain(self, k) -> MarkovChainModel:
        return MarkovChainModel(self.Ps[k], self.partition,
                                self.params.with_setpoint(float(self.setpoints[k])))


def build_switched_family(params, partition, n_p, l_range=None) -> SwitchedControlModel:
    """One chain per grid set-point ``theta_s + j*upsilon``, ``|j| <= l_range``.

    The Gaussian marginals are computed once and shared; only the placement
    of each row into the ON or OFF block changes with the set-point.
    """
    l = partition.l_steps if l_range is None else int(l_range)
    if l + partition.l_steps > partition.m_steps:
        raise ValueError(f"set-points up to {l} grid steps away push the dead-band "
                         f"outside the truncated range")
    G = gaussian_marginals(partition, params)
    sps = np.array([partition.grid_point(j) for j in range(-l, l + 1)])
    Ps = np.array([assemble_chain(G, partition, params.with_setpoint(float(s))) for s in sps])
    return SwitchedControlModel(Ps, sps, l, int(n_p), params.P_rate_on, partition, params)


@dataclass
class FilterState:
    X_hat: np.ndarray
    P_cov: np.ndarray
    R_v: float

    def clamped(self) -> np.ndarray:
        """Estimate clipped to [0, 1]; the raw estimate is left untouched."""
        return np.clip(self.X_hat, 0.0, 1.0)


def kf_step(filt: FilterState, F, y_meas, H, n_p) -> FilterState:
    """Time update with noise covariance at the current estimate, then the
    measurement update. Negative estimate entries are clipped to zero when
    forming the noise covariance so it stays positive semi-definite."""
    if not filt.R_v > 0:
        raise ValueError("R_v must be positive")
    X = filt.X_hat
    X_pred = F @ X
    Q = sigma_of_X(np.clip(X, 0.0, None), F.T, n_p)
    P_pred = F @ filt.P_cov @ F.T + Q
    PH = P_pred @ H
    s = float(H @ PH) + filt.R_v
    if not (s > 0 and math.isfinite(s)):
        raise NumericalGuardError(f"innovation variance {s!r}")
    K = PH / s
    X_new = X_pred + K * (y_meas - H @ X_pred)
    P_new = P_pred - np.outer(K, H @ P_pred)
    P_new = (P_new + P_new.T) / 2
    return FilterState(X_new, P_new, filt.R_v)


def _pick(values, nominal):
    """Argmin with ties to the index nearest ``nominal``, then the lowest."""
    values = np.asarray(values, float)
    best = values.min()
    tol = TIE_RTOL * max(1.0, abs(best))
    cands = np.flatnonzero(values <= best + tol)
    return int(min(cands, key=lambda k: (abs(k - nominal), k)))


def one_step_regulate(X_hat, model: SwitchedControlModel, y_des_next) -> int:
    H = model.H
    preds = np.array([H @ (model.F(k) @ X_hat) for k in range(model.size)])
    return _pick(np.abs(preds - y_des_next), model.nominal)


@dataclass
class SmpcProblem:
    horizon: int
    y_des: np.ndarray
    kappa: np.ndarray | None = None
    rate_limit: int | None = None
    current: int | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        self.y_des = np.asarray(self.y_des, float)
        if self.y_des.shape != (self.horizon,):
            raise ValueError("y_des needs one value per horizon step")
        if self.rate_limit is not None and self.rate_limit < 0:
            raise ValueError("rate_limit must be non-negative")


def _check_schedule(problem, schedule):
    if len(schedule) != problem.horizon:
        raise ValueError("schedule length must equal the horizon")
    if problem.rate_limit is None:
        return
    prev = problem.current
    for k in schedule:
        if prev is not None and abs(k - prev) > problem.rate_limit:
            raise ValueError(f"schedule {tuple(schedule)} violates the rate limit")
        prev = k


def psi_recursive(schedule, model, kappa=None) -> np.ndarray:
    """Backward recursion for the linear cost row ``Psi(T, t)``."""
    Fs = [model.F(k) for k in schedule]
    H = model.H
    T = len(Fs)
    psi = np.zeros(model.n_states) if kappa is None else np.asarray(kappa, float).copy()
    # rows[j] holds H Phi(tau, s+1) for the future tau, with s the current step
    rows = []
    for s in range(T - 1, -1, -1):
        F = Fs[s]
        rows = [H] + [r @ Fs[s + 1] for r in rows] if rows else [H]
        noise = sum(hadamard_map(r[None, :], F)[0] for r in rows)
        psi = psi @ F + noise / model.n_p
    return psi


def _phi(Fs, tau, s, n):
    """``F_{tau-1} ... F_s`` (identity when ``tau == s``)."""
    M = np.eye(n)
    for j in range(s, tau):
        M = Fs[j] @ M
    return M


def psi_explicit(schedule, model, kappa=None) -> np.ndarray:
    """Direct double sum over (tau1, tau2) pairs, for checking the recursion."""
    Fs = [model.F(k) for k in schedule]
    H = model.H
    T = len(Fs)
    n = model.n_states
    kap = np.zeros(n) if kappa is None else np.asarray(kappa, float)
    psi = kap @ _phi(Fs, T, 0, n)
    for t1 in range(T):
        for t2 in range(t1 + 1, T + 1):
            C = H @ _phi(Fs, t2, t1 + 1, n)
            psi = psi + hadamard_map(C[None, :], Fs[t1])[0] @ _phi(Fs, t1, 0, n) / model.n_p
    return psi


def smpc_cost(problem: SmpcProblem, schedule, X, model) -> float:
    """Expected tracking cost plus terminal term for a set-point schedule."""
    _check_schedule(problem, schedule)
    H = model.H
    x = np.asarray(X, float)
    J = 0.0
    for tau, k in enumerate(schedule):
        x = model.F(k) @ x
        J += (H @ x - problem.y_des[tau]) ** 2
    return float(J + psi_recursive(schedule, model, problem.kappa) @ X)


def feasible_schedules(problem, size):
    """All schedules honouring the rate limit, in lexicographic order."""
    r = problem.rate_limit
    if r is None:
        choices = [range(size)] * problem.horizon
        count = size ** problem.horizon
        if count > MAX_SCHEDULES:
            raise NumericalGuardError(
                f"{count} schedules exceed {MAX_SCHEDULES}; shorten the horizon or add a rate limit")
        yield from itertools.product(*choices)
        return
    width = min(size, 2 * r + 1)
    if width ** problem.horizon > MAX_SCHEDULES:
        raise NumericalGuardError(
            f"about {width ** problem.horizon} schedules exceed {MAX_SCHEDULES}; "
            "shorten the horizon or tighten the rate limit")

    def rec(prefix, prev):
        if len(prefix) == problem.horizon:
            yield tuple(prefix)
            return
        lo = 0 if prev is None else max(0, prev - r)
        hi = size - 1 if prev is None else min(size - 1, prev + r)
        for k in range(lo, hi + 1):
            prefix.append(k)
            yield from rec(prefix, k)
            prefix.pop()

    yield from rec([], problem.current)


def _schedule_key(schedule, nominal):
    return (sum(abs(k - nominal) for k in schedule), schedule)


def _argmin_schedule(costs, schedules, nominal):
    costs = np.asarray(costs)
    best = costs.min()
    tol = TIE_RTOL * max(1.0, abs(best))
    cands = [schedules[i] for i in np.flatnonzero(costs <= best + tol)]
    return min(cands, key=lambda s: _schedule_key(s, nominal))


def smpc_plan(problem: SmpcProblem, X_hat, model) -> tuple[tuple, float]:
    """Exhaustive search over rate-limited schedules.

    Ties go to the schedule closest to the nominal set-point in total, then
    the lexicographically smallest.
    """
    schedules = list(feasible_schedules(problem, model.size))
    costs = [smpc_cost(problem, s, X_hat, model) for s in schedules]
    best = _argmin_schedule(costs, schedules, model.nominal)
    return best, float(min(costs))


def energy_cost(prices, schedule, X, model, h_hours, kappa=None) -> float:
    H = model.H
    x = np.asarray(X, float)
    J = 0.0
    for lam, k in zip(prices, schedule):
        x = model.F(k) @ x
        J += lam * h_hours * (H @ x)
    if kappa is not None:
        J += float(np.asarray(kappa) @ x)
    return float(J)


def energy_cost_plan(prices, horizon, X, model, h_hours, rate_limit=None,
                     current=None, kappa=None):
    """Schedule minimizing the expected energy bill over the horizon."""
    prices = np.asarray(prices, float)
    if prices.shape != (horizon,):
        raise ValueError("need one price per horizon step")
    problem = SmpcProblem(horizon, np.zeros(horizon), kappa, rate_limit, current)
    schedules = list(feasible_schedules(problem, model.size))
    costs = [energy_cost(prices, s, X, model, h_hours, kappa) for s in schedules]
    best = _argmin_schedule(costs, schedules, model.nominal)
    return best, float(min(costs))


@dataclass
class LoopResult:
    y_true: np.ndarray
    y_meas: np.ndarray
    y_est: np.ndarray
    y_des: np.ndarray
    setpoint: np.ndarray
    index: np.ndarray
    X_hat: np.ndarray = field(repr=False, default=None)


def closed_loop_run(model: SwitchedControlModel, params, reference, steps, seed,
                    controller="onestep", horizon=5, rate_limit=None, kappa=None,
                    rv_fraction=0.005, init=None, run=0, R_v=None) -> LoopResult:
    """Simulate population, measurement, filter and controller together.

    ``reference`` has ``steps + 1`` entries (kW). At step ``t`` the
    controller picks the set-point applied during ``[t, t+1)`` from the
    current estimate; the population moves, the total power is measured
    with noise of std ``rv_fraction * y(0)`` (or variance ``R_v`` if given)
    and the filter is updated.
    ``init`` is an occupancy vector used both to sample the population and
    as the initial estimate; by default the quasi-stationary occupancy of
    the nominal chain.
    """
    reference = np.asarray(reference, float)
    if reference.shape != (steps + 1,):
        raise ValueError("reference must have steps + 1 entries")
    if init is None:
        init = quasi_stationary(model.chain(model.nominal))
    part = model.partition
    snap = PopulationSnapshot.sample(Histogram(tuple(init), part), model.n_p,
                                     stream(seed, run, INITIAL_STATE))
    pop = Population(snap, params, stream(seed, run, 0))
    meas_rng = stream(seed, run, MEASUREMENT)
    H = model.H
    y0 = pop.power()
    if R_v is None:
        if y0 <= 0:
            raise ValueError("initial power is zero; pass R_v explicitly")
        R_v = (rv_fraction * y0) ** 2
    X0 = np.asarray(init, float)
    # sampling covariance of an n_p-draw histogram
    P0 = (np.diag(X0) - np.outer(X0, X0)) / model.n_p
    filt = FilterState(X0.copy(), P0, R_v)
    out = {k: np.empty(steps + 1) for k in ("y_true", "y_meas", "y_est", "setpoint")}
    idx = np.empty(steps + 1, int)
    Xs = np.empty((steps + 1, len(X0)))
    out["y_true"][0] = y0
    out["y_meas"][0] = y0 + meas_rng.normal(0, math.sqrt(R_v))
    out["y_est"][0] = H @ filt.X_hat
    Xs[0] = filt.X_hat
    current = model.nominal
    for t in range(steps):
        if controller == "onestep":
            k = one_step_regulate(filt.X_hat, model, reference[t + 1])
        elif controller == "smpc":
            hz = min(horizon, steps - t)
            prob = SmpcProblem(hz, reference[t + 1:t + 1 + hz], kappa, rate_limit, current)
            k = smpc_plan(prob, filt.X_hat, model)[0][0]
        elif controller == "none":
            k = model.nominal
        else:
            raise ValueError(f"unknown controller {controller!r}")
        idx[t] = current = k
        out["setpoint"][t] = model.setpoints[k]
        pop.step(model.setpoints[k])
        y = pop.power()
        ym = y + meas_rng.normal(0, math.sqrt(R_v))
        filt = kf_step(filt, model.F(k), ym, H, model.n_p)
        out["y_true"][t + 1] = y
        out["y_meas"][t + 1] = ym
        out["y_est"][t + 1] = H @ filt.X_hat
        Xs[t + 1] = filt.X_hat
    idx[steps] = current
    out["setpoint"][steps] = model.setpoints[current]
    return LoopResult(out["y_true"], out["y_meas"], out["y_est"], reference,
                      out["setpoint"], idx, Xs)
