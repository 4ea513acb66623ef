"""Sixth-order Hermite predictor-corrector with a shared time step.

The predictor is a Taylor expansion using the stored acceleration, jerk and
snap; the corrector is the two-point Hermite formula using the derivatives
at both ends of the step, applied once (PEC).

A predictor truncated at snap leaves an O(dt^5) position error that caps the
global order at five.  After the first step the predictor therefore also
uses the crackle obtained from the quintic Hermite interpolant of the step
just taken; the very first step runs without it.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import ParticleSystem, SimConfig
from .kernel import DerivSet, evaluate

__all__ = [
    "StepRecord",
    "predict",
    "correct",
    "crackle_estimate",
    "initialize",
    "step",
    "next_dt",
    "integrate",
]


@dataclass
class StepRecord:
    dt: float
    t_before: float
    t_after: float
    derivs_old: DerivSet
    derivs_new: DerivSet
    kernel_seconds: float
    total_seconds: float

    @property
    def kernel_fraction(self) -> float:
        return self.kernel_seconds / self.total_seconds if self.total_seconds > 0 else 1.0


def predict(sys: ParticleSystem, dt: float, use_crackle: bool = True):
    """Taylor-predicted ``(pos, vel)`` at ``sys.t + dt``.

    The crackle term is added only when ``sys.crackle`` is set and
    ``use_crackle`` is true.
    """
    dt2 = dt * dt / 2.0
    dt3 = dt * dt * dt / 6.0
    dt4 = dt * dt * dt * dt / 24.0
    pos = sys.pos + sys.vel * dt + sys.acc * dt2 + sys.jerk * dt3 + sys.snap * dt4
    vel = sys.vel + sys.acc * dt + sys.jerk * dt2 + sys.snap * dt3
    if use_crackle and sys.crackle is not None:
        pos = pos + sys.crackle * (dt4 * dt / 5.0)
        vel = vel + sys.crackle * dt4
    return pos, vel


def correct(pos0, vel0, old: DerivSet, new: DerivSet, dt: float):
    """Two-point Hermite corrector from the step-start state ``(pos0, vel0)``."""
    h = dt / 2.0
    h2 = dt * dt / 10.0
    h3 = dt * dt * dt / 120.0
    vel = vel0 + h * (new.acc + old.acc) - h2 * (new.jerk - old.jerk) + h3 * (new.snap + old.snap)
    pos = pos0 + h * (vel + vel0) - h2 * (new.acc - old.acc) + h3 * (new.jerk + old.jerk)
    return pos, vel


def crackle_estimate(old: DerivSet, new: DerivSet, dt: float) -> np.ndarray:
    """Third derivative of acceleration at the end of a step of length ``dt``.

    Differentiates the quintic matching acc, jerk and snap at both ends.
    """
    return (
        60.0 * (new.acc - old.acc)
        - dt * (24.0 * old.jerk + 36.0 * new.jerk)
        - dt * dt * (3.0 * old.snap - 9.0 * new.snap)
    ) / (dt * dt * dt)


def next_dt(derivs: DerivSet, eta: float, bounds: tuple[float, float]) -> float:
    """``eta * min_i sqrt(|a_i| / |s_i|)`` clamped to ``bounds``."""
    dt_min, dt_max = bounds
    a = np.linalg.norm(derivs.acc, axis=1)
    s = np.linalg.norm(derivs.snap, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(s > 0, np.sqrt(a / np.where(s > 0, s, 1.0)), np.inf)
    dt = eta * float(ratio.min()) if ratio.size else math.inf
    return min(max(dt, dt_min), dt_max)


def _derivs_of(sys: ParticleSystem) -> DerivSet:
    return DerivSet(sys.acc, sys.jerk, sys.snap)


def initialize(sys: ParticleSystem, cfg: SimConfig) -> DerivSet:
    """Evaluate and store derivatives at the current time."""
    d = evaluate(sys.mass, sys.pos, sys.vel, cfg.softening, cfg.precision, cfg.workers)
    sys.acc, sys.jerk, sys.snap = d.acc, d.jerk, d.snap
    sys.derivs_t = sys.t
    return d


def step(sys: ParticleSystem, cfg: SimConfig):
    """Advance one step; returns the new system and its :class:`StepRecord`.

    ``sys`` itself is left untouched apart from derivative initialization
    when its stored derivatives are stale.
    """
    if not sys.derivs_current:
        initialize(sys, cfg)
    old = _derivs_of(sys)
    if cfg.adaptive:
        dt = next_dt(old, cfg.eta, (cfg.dt_min, cfg.dt_max))
    else:
        dt = cfg.dt

    t0 = time.perf_counter()
    pos_p, vel_p = predict(sys, dt, cfg.use_crackle)
    k0 = time.perf_counter()
    new = evaluate(sys.mass, pos_p, vel_p, cfg.softening, cfg.precision, cfg.workers)
    k1 = time.perf_counter()
    pos, vel = correct(sys.pos, sys.vel, old, new, dt)
    out = ParticleSystem(
        mass=sys.mass, pos=pos, vel=vel,
        acc=new.acc, jerk=new.jerk, snap=new.snap,
        crackle=crackle_estimate(old, new, dt) if cfg.use_crackle else None,
        t=sys.t + dt,
    )
    out.derivs_t = out.t
    t1 = time.perf_counter()

    rec = StepRecord(
        dt=dt, t_before=sys.t, t_after=out.t,
        derivs_old=old, derivs_new=new,
        kernel_seconds=k1 - k0, total_seconds=t1 - t0,
    )
    return out, rec


def integrate(sys: ParticleSystem, cfg: SimConfig, n_steps: int):
    """Take ``n_steps`` steps; returns the final system and the step records."""
    records = []
    for _ in range(n_steps):
        sys, rec = step(sys, cfg)
        records.append(rec)
    return sys, records
