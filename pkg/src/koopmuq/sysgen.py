"""Fixed-step RK4 simulation of a single-machine swing equation.

    d(delta)/dt   = dw
    d(dw)/dt      = omega_R / (2 H) * (P_M - P_max sin(delta) - D dw)

Outputs the rotor angle and speed deviation, optionally followed by
``sin(delta)`` and ``cos(delta)`` so that the series has four states.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DivergenceError, InvalidParameter, ShapeError
from .ingest import NoiseModel, TimeSeries
from .numkernel import RngHandle


@dataclass(frozen=True)
class SwingSystem:
    H: float = 3.5
    omega_R: float = 2 * np.pi * 60
    P_M: float = 0.8
    P_max: float = 1.6
    D: float = 0.05

    def __post_init__(self):
        for name in ("H", "omega_R", "P_max"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be positive")
        if self.D < 0:
            raise InvalidParameter("D must be non-negative")

    @property
    def equilibrium_angle(self):
        return float(np.arcsin(self.P_M / self.P_max))

    def vector_field(self, t, x):
        delta, dw = x
        acc = self.omega_R / (2 * self.H) * (self.P_M - self.P_max * np.sin(delta) - self.D * dw)
        return np.array([dw, acc])


@dataclass(frozen=True)
class SimConfig:
    h: float = 0.01
    duration: float = 20.0
    x0: tuple = (0.8, 0.0)
    derived: bool = True

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidParameter("h must be positive")
        if not self.duration >= self.h:
            raise InvalidParameter("duration must be at least one step h")

    @property
    def steps(self):
        return int(round(self.duration / self.h))

    def to_json(self):
        d = asdict(self)
        d["x0"] = list(self.x0)
        return d


def rk4_integrate(f, x0, cfg: SimConfig, names=None) -> TimeSeries:
    """Classical RK4 with step ``cfg.h``; ``f(t, x)`` returns dx/dt."""
    x = np.array(x0, dtype=float)
    h = cfg.h
    out = np.empty((cfg.steps + 1, x.size))
    out[0] = x
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(cfg.steps):
            k1 = f(t, x)
            k2 = f(t + h / 2, x + h / 2 * k1)
            k3 = f(t + h / 2, x + h / 2 * k2)
            k4 = f(t + h, x + h * k3)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = (k + 1) * h
            if not np.all(np.isfinite(x)):
                raise DivergenceError(t)
            out[k + 1] = x
    names = names or [f"x{i + 1}" for i in range(x.size)]
    return TimeSeries(h, names, out)


def swing_trajectory(sys: SwingSystem, cfg: SimConfig) -> TimeSeries:
    ts = rk4_integrate(sys.vector_field, cfg.x0, cfg, names=["delta", "dw"])
    if not cfg.derived:
        return ts
    delta = ts.data[:, 0]
    data = np.column_stack([ts.data, np.sin(delta), np.cos(delta)])
    return TimeSeries(ts.sample_period, ["delta", "dw", "sin_delta", "cos_delta"], data)


def add_measurement_noise(ts: TimeSeries, noise: NoiseModel, rng: RngHandle) -> TimeSeries:
    if len(noise) != ts.n:
        raise ShapeError(f"noise has {len(noise)} variances, series has {ts.n} states")
    z = rng.generator().standard_normal(ts.data.shape)
    return TimeSeries(ts.sample_period, ts.state_names, ts.data + np.sqrt(noise.variances) * z)
