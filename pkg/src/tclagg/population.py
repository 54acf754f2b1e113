"""Continuous-state TCL dynamics and seeded Monte Carlo populations.

Random streams: every run ``k`` of a root ``seed`` owns the generator
``stream(seed, k, purpose)``, built from ``SeedSequence(seed,
spawn_key=(k, purpose))``. Purposes are process noise, initial-state
sampling and measurement noise. Within a run the process-noise stream draws
one normal vector of length ``n_p`` per step, so results do not depend on
how runs are scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .params import TclParams, TclState, switch

PROCESS_NOISE = 0
INITIAL_STATE = 1
MEASUREMENT = 2
HETEROGENEITY = 3


def stream(seed: int, run: int = 0, purpose: int = PROCESS_NOISE) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(int(seed), spawn_key=(int(run), int(purpose)))))


def tcl_step(state: TclState, params: TclParams, noise_draw: float) -> TclState:
    if not math.isfinite(noise_draw):
        raise ValueError("noise_draw must be finite")
    theta = params.mean_next(state.theta, state.mode) + noise_draw
    mode = switch(state.mode, state.theta, params.theta_minus, params.theta_plus)
    return TclState(mode, float(theta))


@dataclass
class PopulationSnapshot:
    modes: np.ndarray
    thetas: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        self.modes = np.asarray(self.modes, np.int8).copy()
        self.thetas = np.asarray(self.thetas, float).copy()
        if self.modes.shape != self.thetas.shape or self.modes.ndim != 1:
            raise ValueError("modes and thetas must be 1-d arrays of equal length")
        if not np.isin(self.modes, (0, 1)).all():
            raise ValueError("modes must be 0 or 1")
        if not np.isfinite(self.thetas).all():
            raise ValueError("temperatures must be finite")

    @classmethod
    def from_states(cls, states: Sequence[TclState], time_index=0):
        return cls([s.mode for s in states], [s.theta for s in states], time_index)

    @classmethod
    def sample(cls, init, n_p: int, rng):
        modes, thetas = init.sample(rng, n_p)
        return cls(modes, thetas)

    @property
    def n_p(self) -> int:
        return len(self.modes)

    @property
    def states(self) -> list[TclState]:
        return [TclState(int(m), float(t)) for m, t in zip(self.modes, self.thetas)]


class Population:
    """A population of TCLs stepped in lock-step.

    ``params`` is one ``TclParams`` shared by all or a list with one entry
    per TCL. ``step(theta_s)`` moves every dead-band to a common set-point.
    """

    def __init__(self, snapshot: PopulationSnapshot, params, rng):
        self.modes = snapshot.modes.copy()
        self.thetas = snapshot.thetas.copy()
        self.t = snapshot.time_index
        self.rng = rng
        n_p = len(self.modes)
        plist = [params] * n_p if isinstance(params, TclParams) else list(params)
        if len(plist) != n_p:
            raise ValueError(f"got {len(plist)} parameter sets for {n_p} TCLs")
        col = lambda name: np.array([getattr(p, name) for p in plist])
        self.a = col("a")
        self.theta_a = col("theta_a")
        self.RP = col("R") * col("P_rate")
        self.sigma = col("sigma")
        self.half_band = col("delta") / 2
        self.theta_s0 = col("theta_s")
        self.p_on = col("P_rate_on")

    @property
    def n_p(self) -> int:
        return len(self.modes)

    def power(self) -> float:
        return float(np.dot(self.modes, self.p_on))

    def snapshot(self) -> PopulationSnapshot:
        return PopulationSnapshot(self.modes, self.thetas, self.t)

    def step(self, theta_s=None) -> None:
        ts = self.theta_s0 if theta_s is None else theta_s
        w = self.rng.standard_normal(self.n_p) * self.sigma
        target = self.theta_a - self.modes * self.RP
        new_theta = self.a * self.thetas + (1 - self.a) * target + w
        self.modes = switch(self.modes, self.thetas, ts - self.half_band, ts + self.half_band)
        self.thetas = new_theta
        self.t += 1


@dataclass
class SimulationResult:
    power: np.ndarray
    modes: np.ndarray | None = None
    thetas: np.ndarray | None = None


def _initial_snapshot(init, n_p, seed, run):
    if isinstance(init, PopulationSnapshot):
        return init
    if n_p is None:
        raise ValueError("n_p is required when init is a distribution")
    return PopulationSnapshot.sample(init, n_p, stream(seed, run, INITIAL_STATE))


def simulate_population(init, params, steps: int, seed: int, run: int = 0,
                        n_p: int | None = None, record_states: bool = True,
                        setpoints=None) -> SimulationResult:
    """Power trajectory ``y(0..steps)`` of one seeded run.

    ``init`` is a snapshot or a distribution (then ``n_p`` is required).
    ``setpoints`` optionally gives the set-point applied at each step.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    snap = _initial_snapshot(init, n_p, seed, run)
    pop = Population(snap, params, stream(seed, run, PROCESS_NOISE))
    power = np.empty(steps + 1)
    power[0] = pop.power()
    modes = thetas = None
    if record_states:
        modes = np.empty((steps + 1, pop.n_p), np.int8)
        thetas = np.empty((steps + 1, pop.n_p))
        modes[0], thetas[0] = pop.modes, pop.thetas
    for t in range(steps):
        pop.step(None if setpoints is None else setpoints[t])
        power[t + 1] = pop.power()
        if record_states:
            modes[t + 1], thetas[t + 1] = pop.modes, pop.thetas
    return SimulationResult(power, modes, thetas)


@dataclass
class McResult:
    mean: np.ndarray
    stderr: np.ndarray
    runs: int
    samples: np.ndarray


def mc_expected_power(init, params, steps: int, runs: int, seed: int,
                      n_p: int | None = None, threads: int = 1) -> McResult:
    """Across-run mean and standard error of the power trajectory."""
    if runs < 1:
        raise ValueError("runs must be at least 1")

    def one(k):
        return simulate_population(init, params, steps, seed, run=k, n_p=n_p,
                                   record_states=False).power

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            samples = np.array(list(ex.map(one, range(runs))))
    else:
        samples = np.array([one(k) for k in range(runs)])
    mean = samples.mean(axis=0)
    if runs > 1:
        se = samples.std(axis=0, ddof=1) / math.sqrt(runs)
    else:
        se = np.zeros_like(mean)
    return McResult(mean, se, runs, samples)


@dataclass
class ModeEstimate:
    p: float
    stderr: float
    ci_low: float
    ci_high: float
    runs: int


def mc_expected_mode(initial: TclState, params: TclParams, N: int, runs: int,
                     seed: int, z: float = 1.96) -> ModeEstimate:
    """Fraction of ``runs`` independent copies with ``m(N) = 1``.

    The interval is the Wilson score interval at level ``z``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    snap = PopulationSnapshot(np.full(runs, initial.mode), np.full(runs, initial.theta))
    pop = Population(snap, params, stream(seed, 0, PROCESS_NOISE))
    for _ in range(N):
        pop.step()
    p = float(pop.modes.mean())
    se = math.sqrt(p * (1 - p) / runs)
    denom = 1 + z * z / runs
    centre = (p + z * z / (2 * runs)) / denom
    half = z * math.sqrt(p * (1 - p) / runs + z * z / (4 * runs * runs)) / denom
    return ModeEstimate(p, se, max(0.0, centre - half), min(1.0, centre + half), runs)
