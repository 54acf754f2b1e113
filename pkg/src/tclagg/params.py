"""Physical parameters and hybrid state of a single cooling TCL."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

SECONDS_PER_HOUR = 3600.0


def noise_std(scale: float, h_seconds: float) -> float:
    """Per-step noise std ``scale * sqrt(h)`` with ``h`` in seconds.

    ``noise_std(0.001, 10) ~= 0.0032`` and ``noise_std(0.01, 10) ~= 0.032``.
    """
    return scale * math.sqrt(h_seconds)


@dataclass(frozen=True)
class TclParams:
    """Parameters of one cooling thermostatically controlled load.

    Units: temperatures in degC, ``R`` in degC/kW, ``C`` in kWh/degC,
    ``P_rate`` in kW, ``h_seconds`` in seconds, ``sigma`` in degC per step.
    Defaults are the homogeneous case-study values.
    """

    theta_s: float = 20.0
    delta: float = 0.5
    theta_a: float = 32.0
    R: float = 2.0
    C: float = 10.0
    P_rate: float = 14.0
    eta: float = 2.5
    h_seconds: float = 10.0
    sigma: float = 0.0
    check_feasible: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        vals = (self.theta_s, self.delta, self.theta_a, self.R, self.C,
                self.P_rate, self.eta, self.h_seconds, self.sigma)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("TclParams fields must be finite")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.h_seconds <= 0:
            raise ValueError(f"h_seconds must be positive, got {self.h_seconds}")
        if self.R <= 0 or self.C <= 0 or self.P_rate <= 0:
            raise ValueError("R, C and P_rate must be positive")
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a = {self.a} outside (0, 1)")
        if self.check_feasible:
            lo = self.theta_a - self.R * self.P_rate
            if not (lo <= self.theta_minus and self.theta_plus <= self.theta_a):
                raise ValueError(
                    f"dead-band [{self.theta_minus}, {self.theta_plus}] not inside "
                    f"the reachable range [{lo}, {self.theta_a}] of a cooling TCL")

    @property
    def h_hours(self) -> float:
        return self.h_seconds / SECONDS_PER_HOUR

    @property
    def a(self) -> float:
        # R*C is in hours, so h enters in hours here.
        return math.exp(-self.h_hours / (self.R * self.C))

    @property
    def P_rate_on(self) -> float:
        return self.P_rate / self.eta

    @property
    def theta_minus(self) -> float:
        return self.theta_s - self.delta / 2

    @property
    def theta_plus(self) -> float:
        return self.theta_s + self.delta / 2

    def drift_target(self, mode: int) -> float:
        """Fixed point of the noiseless dynamics with the mode held."""
        return self.theta_a - mode * self.R * self.P_rate

    def mean_next(self, theta, mode):
        """Noiseless one-step temperature map (works on arrays)."""
        a = self.a
        return a * theta + (1 - a) * (self.theta_a - mode * self.R * self.P_rate)

    def replace(self, **changes) -> "TclParams":
        return replace(self, **changes)

    def with_setpoint(self, theta_s: float) -> "TclParams":
        return replace(self, theta_s=theta_s)


@dataclass(frozen=True)
class TclState:
    mode: int
    theta: float

    def __post_init__(self):
        if self.mode not in (0, 1):
            raise ValueError(f"mode must be 0 or 1, got {self.mode}")
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")


def switch(mode, theta, theta_minus, theta_plus):
    """Dead-band switching rule; ties at the edges keep the current mode.

    Accepts scalars or numpy arrays.
    """
    out = np.where(theta < theta_minus, 0, np.where(theta > theta_plus, 1, mode))
    if np.ndim(out) == 0:
        return int(out)
    return out.astype(np.int8)
