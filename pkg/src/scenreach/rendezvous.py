"""Spacecraft rendezvous benchmark: planar relative-orbit dynamics of a
deputy approaching a chief on a circular orbit, discretized by exact
zero-order hold, with a line-of-sight safe cone and a docking target box.

State is (x, y, xdot, ydot) in km and km/s; inputs are thrust forces in
kg km/s^2 applied through a 1/mass gain. The continuous dynamics are

    xddot = 3 w^2 x + 2 w ydot + Fx / m
    yddot = -2 w xdot + Fy / m

with w the orbital rate at the given altitude.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linops import expm
from .scenarios import NoiseModel
from .sets import InputBox, Polytope, ReachAvoidSpec
from .system import LtiSystem

__all__ = ["CwhConfig", "build_cwh_system", "build_rendezvous_noise",
           "build_rendezvous_spec", "load_cwh_config", "save_cwh_config"]

MU_EARTH = 398600.4418      # km^3 / s^2
EARTH_RADIUS = 6378.137     # km


@dataclass(frozen=True)
class CwhConfig:
    mass: float = 300.0           # kg
    altitude: float = 850.0       # km above the Earth surface
    period: float = 20.0          # sampling time, s
    horizon: int = 5
    x0: tuple = (-0.75, -0.75, 0.0, 0.0)
    input_lo: tuple = (-0.1, -0.1)
    input_hi: tuple = (0.1, 0.1)
    noise_variances: tuple = (1e-4, 1e-4, 5e-8, 5e-8)

    @property
    def orbital_rate(self) -> float:
        r0 = EARTH_RADIUS + self.altitude
        return float(np.sqrt(MU_EARTH / r0 ** 3))


def build_cwh_system(cfg: CwhConfig) -> LtiSystem:
    """Exact zero-order-hold discretization of the in-plane dynamics.

    The ZOH pair comes from one matrix exponential of the augmented
    [[A_c, B_c], [0, 0]] block over the sampling period.
    """
    w = cfg.orbital_rate
    a_c = np.array([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [3.0 * w * w, 0.0, 0.0, 2.0 * w],
        [0.0, 0.0, -2.0 * w, 0.0],
    ])
    b_c = np.array([
        [0.0, 0.0],
        [0.0, 0.0],
        [1.0 / cfg.mass, 0.0],
        [0.0, 1.0 / cfg.mass],
    ])
    aug = np.zeros((6, 6))
    aug[:4, :4] = a_c
    aug[:4, 4:] = b_c
    phi = expm(aug * cfg.period)
    return LtiSystem(a=phi[:4, :4], b=phi[:4, 4:])


def build_rendezvous_spec(cfg: CwhConfig | None = None) -> tuple[ReachAvoidSpec, InputBox]:
    """Line-of-sight cone safe set and docking-box target set.

    Safe: |x| <= -y (the cone opening toward negative y), y >= -1, and
    velocity caps |xdot| <= 0.05, |ydot| <= 0.05. Target: |x| <= 0.1,
    -0.1 <= y <= 0, |xdot| <= 0.01, |ydot| <= 0.01.
    """
    cfg = cfg or CwhConfig()
    safe = Polytope(
        f=np.array([
            [1.0, 1.0, 0.0, 0.0],    # x + y <= 0
            [-1.0, 1.0, 0.0, 0.0],   # -x + y <= 0
            [0.0, -1.0, 0.0, 0.0],   # y >= -1
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, -1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, -1.0],
        ]),
        h=np.array([0.0, 0.0, 1.0, 0.05, 0.05, 0.05, 0.05]),
    )
    target = Polytope(
        f=np.array([
            [1.0, 0.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, -1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, -1.0],
        ]),
        h=np.array([0.1, 0.1, 0.0, 0.1, 0.01, 0.01, 0.01, 0.01]),
    )
    spec = ReachAvoidSpec(safe=safe, target=target, horizon=cfg.horizon)
    box = InputBox.repeat(np.asarray(cfg.input_lo, dtype=float),
                          np.asarray(cfg.input_hi, dtype=float), cfg.horizon)
    return spec, box


def build_rendezvous_noise(cfg: CwhConfig | None = None) -> NoiseModel:
    cfg = cfg or CwhConfig()
    return NoiseModel.gaussian_diag(np.zeros(4), np.asarray(cfg.noise_variances))


def save_cwh_config(cfg: CwhConfig, path) -> None:
    data = {
        "mass": cfg.mass,
        "altitude": cfg.altitude,
        "period": cfg.period,
        "horizon": cfg.horizon,
        "x0": list(cfg.x0),
        "input_lo": list(cfg.input_lo),
        "input_hi": list(cfg.input_hi),
        "noise_variances": list(cfg.noise_variances),
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_cwh_config(path) -> CwhConfig:
    d = json.loads(Path(path).read_text())
    return CwhConfig(mass=float(d["mass"]), altitude=float(d["altitude"]),
                     period=float(d["period"]), horizon=int(d["horizon"]),
                     x0=tuple(d["x0"]), input_lo=tuple(d["input_lo"]),
                     input_hi=tuple(d["input_hi"]),
                     noise_variances=tuple(d["noise_variances"]))
