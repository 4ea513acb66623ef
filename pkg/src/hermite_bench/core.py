"""Particle state, initial conditions, conservation diagnostics and snapshot I/O.

Units are N-body units: G = 1 and, for the generators, total mass 1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from numba import njit

__all__ = [
    "Precision",
    "ParticleSystem",
    "SimConfig",
    "make_two_body",
    "make_plummer",
    "kinetic_energy",
    "potential_energy",
    "total_energy",
    "angular_momentum",
    "linear_momentum",
    "read_snapshot",
    "write_snapshot",
]


class Precision(str, enum.Enum):
    DP = "dp"
    EX = "ex"


@dataclass
class ParticleSystem:
    mass: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    acc: Optional[np.ndarray] = None
    jerk: Optional[np.ndarray] = None
    snap: Optional[np.ndarray] = None
    # interpolated from the previous step; None before the first step
    crackle: Optional[np.ndarray] = None
    t: float = 0.0
    # time at which acc/jerk/snap were evaluated; None means never
    derivs_t: Optional[float] = field(default=None)

    def __post_init__(self):
        self.mass = np.ascontiguousarray(self.mass, dtype=np.float64).reshape(-1)
        n = self.mass.shape[0]
        if n < 1:
            raise ValueError("a particle system needs at least one body")
        if not np.all(np.isfinite(self.mass)) or np.any(self.mass <= 0):
            raise ValueError("masses must be strictly positive and finite")
        self.pos = _vec3(self.pos, n, "pos")
        self.vel = _vec3(self.vel, n, "vel")
        for name in ("acc", "jerk", "snap"):
            arr = getattr(self, name)
            setattr(self, name, np.zeros((n, 3)) if arr is None else _vec3(arr, n, name))
        if self.crackle is not None:
            self.crackle = _vec3(self.crackle, n, "crackle")

    @property
    def n(self) -> int:
        return self.mass.shape[0]

    @property
    def derivs_current(self) -> bool:
        return self.derivs_t is not None and self.derivs_t == self.t

    def copy(self) -> "ParticleSystem":
        return replace(
            self,
            mass=self.mass.copy(),
            pos=self.pos.copy(),
            vel=self.vel.copy(),
            acc=self.acc.copy(),
            jerk=self.jerk.copy(),
            snap=self.snap.copy(),
            crackle=None if self.crackle is None else self.crackle.copy(),
        )


def _vec3(a, n, name):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.shape != (n, 3):
        raise ValueError(f"{name} must have shape ({n}, 3), got {a.shape}")
    return a


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    ``dt`` is used for constant steps; when ``adaptive`` is set the step is
    chosen each time from ``eta`` and clamped to ``[dt_min, dt_max]``.
    ``use_crackle=False`` restricts the predictor to acc/jerk/snap.
    """

    softening: float = 0.0
    eta: float = 0.01
    dt: float = 1.0 / 1024
    adaptive: bool = False
    dt_min: float = 1.0 / 2**20
    dt_max: float = 1.0 / 64
    precision: Precision = Precision.DP
    workers: int = 1
    use_crackle: bool = True

    def __post_init__(self):
        object.__setattr__(self, "precision", Precision(self.precision))
        if not self.softening >= 0:
            raise ValueError("softening must be >= 0")
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if not self.dt != 0 or not math.isfinite(self.dt):
            raise ValueError("dt must be finite and nonzero")
        if not (0 < self.dt_min <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_max")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------

def make_two_body(eccentricity: float) -> ParticleSystem:
    """Equal-mass Kepler binary (a = 1, M = 1) at apoapsis in the xy-plane.

    The bodies start on the x-axis and orbit counter-clockwise about +z with
    period 2*pi.
    """
    e = float(eccentricity)
    if not 0.0 <= e < 1.0:
        raise ValueError(f"eccentricity must lie in [0, 1), got {e}")
    r = 1.0 + e
    v = math.sqrt((1.0 - e) / (1.0 + e))
    pos = np.array([[-0.5 * r, 0.0, 0.0], [0.5 * r, 0.0, 0.0]])
    vel = np.array([[0.0, -0.5 * v, 0.0], [0.0, 0.5 * v, 0.0]])
    return ParticleSystem(mass=np.array([0.5, 0.5]), pos=pos, vel=vel)


# virial radius 1 for a unit-mass Plummer sphere: r_vir = 16 a / (3 pi)
PLUMMER_SCALE = 3.0 * math.pi / 16.0
# cumulative-mass cutoff keeping the sampled sphere finite
_PLUMMER_MCUT = 0.999


def make_plummer(n: int, seed: int) -> ParticleSystem:
    """Equal-mass Plummer sphere with virial radius 1.

    Radii come from inverting the cumulative mass profile, speeds from von
    Neumann rejection on ``q**2 (1 - q**2)**3.5`` in units of the local
    escape speed.  A Philox counter-based generator keyed by ``seed`` makes
    the draw bit-reproducible.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    a = PLUMMER_SCALE

    m = rng.uniform(0.0, _PLUMMER_MCUT, n)
    # guard m == 0 which maps to r == 0
    m = np.maximum(m, 1e-300)
    r = a / np.sqrt(m ** (-2.0 / 3.0) - 1.0)
    pos = r[:, None] * _isotropic(rng, n)

    q = np.empty(n)
    filled = 0
    while filled < n:
        k = n - filled
        x = rng.uniform(0.0, 1.0, k)
        y = rng.uniform(0.0, 0.1, k)
        keep = x[y < x * x * (1.0 - x * x) ** 3.5]
        take = min(keep.size, k)
        q[filled:filled + take] = keep[:take]
        filled += take
    v_esc = np.sqrt(2.0) * (r * r + a * a) ** -0.25
    vel = (q * v_esc)[:, None] * _isotropic(rng, n)

    mass = np.full(n, 1.0 / n)
    pos -= mass @ pos / mass.sum()
    vel -= mass @ vel / mass.sum()
    return ParticleSystem(mass=mass, pos=pos, vel=vel)


def _isotropic(rng, n):
    cos_t = rng.uniform(-1.0, 1.0, n)
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    sin_t = np.sqrt(1.0 - cos_t * cos_t)
    return np.column_stack((sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t))


# ---------------------------------------------------------------------------
# diagnostics (always binary64, fixed summation order)
# ---------------------------------------------------------------------------

@njit(cache=True, error_model="numpy")
def _potential(mass, pos, eps2):
    n = mass.shape[0]
    pe = 0.0
    for i in range(n):
        xi, yi, zi = pos[i, 0], pos[i, 1], pos[i, 2]
        part = 0.0
        for j in range(i + 1, n):
            dx = pos[j, 0] - xi
            dy = pos[j, 1] - yi
            dz = pos[j, 2] - zi
            part += mass[j] / np.sqrt(dx * dx + dy * dy + dz * dz + eps2)
        pe -= mass[i] * part
    return pe


def kinetic_energy(sys: ParticleSystem) -> float:
    total = 0.0
    for i in range(sys.n):
        v = sys.vel[i]
        total += 0.5 * sys.mass[i] * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    return total


def potential_energy(sys: ParticleSystem, softening: float = 0.0) -> float:
    return float(_potential(sys.mass, sys.pos, float(softening) ** 2))


def total_energy(sys: ParticleSystem, softening: float = 0.0) -> float:
    """Kinetic plus softened potential energy, ``-m_i m_j / sqrt(r^2 + eps^2)``."""
    return kinetic_energy(sys) + potential_energy(sys, softening)


def angular_momentum(sys: ParticleSystem) -> np.ndarray:
    L = np.zeros(3)
    for i in range(sys.n):
        L += sys.mass[i] * np.cross(sys.pos[i], sys.vel[i])
    return L


def linear_momentum(sys: ParticleSystem) -> np.ndarray:
    P = np.zeros(3)
    for i in range(sys.n):
        P += sys.mass[i] * sys.vel[i]
    return P


# ---------------------------------------------------------------------------
# snapshot I/O: "mass x y z vx vy vz" per line, '#' comments
# ---------------------------------------------------------------------------

def write_snapshot(sys: ParticleSystem, path, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# t = {sys.t!r}\n")
        if comment:
            for line in comment.splitlines():
                f.write(f"# {line}\n")
        f.write("# mass x y z vx vy vz\n")
        for i in range(sys.n):
            row = (sys.mass[i], *sys.pos[i], *sys.vel[i])
            f.write(" ".join(format(float(v), ".17g") for v in row) + "\n")


def _parse_float(tok: str) -> float:
    try:
        return float(tok)
    except ValueError:
        return float.fromhex(tok)


def read_snapshot(path) -> ParticleSystem:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if len(toks) != 7:
                raise ValueError(f"{path}:{lineno}: expected 7 columns, got {len(toks)}")
            try:
                rows.append([_parse_float(t) for t in toks])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed number") from None
    if not rows:
        raise ValueError(f"{path}: no bodies found")
    data = np.array(rows)
    return ParticleSystem(mass=data[:, 0], pos=data[:, 1:4], vel=data[:, 4:7])
