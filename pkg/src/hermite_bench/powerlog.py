"""Power-trace ingestion and energy metrics.

Traces are CSV files of ``t_seconds,power_watts`` samples from an external
meter or sensor log.  From an idle trace and an active trace the module
derives the baseline energies over a measurement window (180 s by default),
the energy-to-solution of a run, and its energy-delay product::

    E_impl = (E_device_baseline - E_baseline) * (T_device / window)
    EDP_w  = E_device_baseline * (T_device / window) ** w

EDP is computed from the active-window energy without subtracting the idle
baseline, which differs from the classic ``E * T**w`` form; the
baseline-subtracted variant is available separately as ``edp_marginal``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "DEFAULT_WINDOW_S",
    "DEFAULT_EDP_WEIGHTS",
    "TraceParseError",
    "TraceRangeError",
    "NegativeEnergyWarning",
    "PowerTrace",
    "EnergyReport",
    "parse_trace",
    "read_trace",
    "integrate_energy",
    "energy_to_solution",
    "edp",
    "edp_marginal",
    "build_energy_report",
]

DEFAULT_WINDOW_S = 180.0
DEFAULT_EDP_WEIGHTS = (1, 3)
_STANDARD_WEIGHTS = (1, 2, 3)


class TraceParseError(ValueError):
    def __init__(self, msg, lineno=None):
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)
        self.lineno = lineno


class TraceRangeError(ValueError):
    pass


class NegativeEnergyWarning(UserWarning):
    """The active trace drew less energy than the idle trace."""


@dataclass(frozen=True)
class PowerTrace:
    t: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        p = np.asarray(self.p, dtype=np.float64)
        if t.ndim != 1 or t.shape != p.shape:
            raise ValueError("t and p must be 1-d arrays of equal length")
        if t.size < 2:
            raise ValueError("a power trace needs at least 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise ValueError("trace contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if np.any(p < 0):
            raise ValueError("power must be non-negative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])


def parse_trace(text) -> PowerTrace:
    """Parse ``t,p`` CSV text (str or bytes).

    Blank lines and ``#`` comments are skipped, as is a ``t,p`` header on the
    first data line.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    ts, ps = [], []
    seen_data = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = [c.strip() for c in line.split(",")]
        if not seen_data and [c.lower() for c in cols] == ["t", "p"]:
            seen_data = True
            continue
        seen_data = True
        if len(cols) != 2:
            raise TraceParseError(f"expected 2 columns, got {len(cols)}", lineno)
        try:
            t, p = float(cols[0]), float(cols[1])
        except ValueError:
            raise TraceParseError(f"malformed number in {line!r}", lineno) from None
        if not (math.isfinite(t) and math.isfinite(p)):
            raise TraceParseError("non-finite value", lineno)
        if p < 0:
            raise TraceParseError(f"negative power {p}", lineno)
        if ts and t <= ts[-1]:
            raise TraceParseError(f"timestamp {t} does not increase", lineno)
        ts.append(t)
        ps.append(p)
    if len(ts) < 2:
        raise TraceParseError(f"need at least 2 samples, found {len(ts)}")
    return PowerTrace(np.array(ts), np.array(ps))


def read_trace(path) -> PowerTrace:
    with open(path, "rb") as f:
        data = f.read()
    try:
        return parse_trace(data)
    except TraceParseError as exc:
        raise TraceParseError(f"{path}: {exc}") from None


def integrate_energy(trace: PowerTrace, window: tuple[float, float]) -> float:
    """Trapezoidal energy in joules over ``window``, interpolating at the edges."""
    t0, t1 = float(window[0]), float(window[1])
    if not t0 < t1:
        raise TraceRangeError(f"empty window [{t0}, {t1}]")
    lo, hi = trace.span
    if t0 < lo or t1 > hi:
        raise TraceRangeError(f"window [{t0}, {t1}] outside trace span [{lo}, {hi}]")
    inside = (trace.t > t0) & (trace.t < t1)
    t = np.concatenate(([t0], trace.t[inside], [t1]))
    p = np.concatenate(
        ([np.interp(t0, trace.t, trace.p)], trace.p[inside], [np.interp(t1, trace.t, trace.p)])
    )
    return float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(t)))


def _check_times(t_device, window):
    if not (t_device > 0 and math.isfinite(t_device)):
        raise ValueError(f"T_device must be positive, got {t_device}")
    if not (window > 0 and math.isfinite(window)):
        raise ValueError(f"measurement window must be positive, got {window}")


def energy_to_solution(e_device_baseline, e_baseline, t_device, window=DEFAULT_WINDOW_S):
    """Marginal energy of a run.  Negative values are returned with a warning."""
    _check_times(t_device, window)
    e = (e_device_baseline - e_baseline) * (t_device / window)
    if e < 0:
        warnings.warn(
            f"negative energy-to-solution {e:.6g} J: active trace drew less than idle",
            NegativeEnergyWarning,
            stacklevel=2,
        )
    return e


def _check_weight(w, any_weight):
    if isinstance(w, bool) or int(w) != w:
        raise ValueError(f"EDP weight must be an integer, got {w!r}")
    w = int(w)
    if any_weight:
        if w < 1:
            raise ValueError(f"EDP weight must be a positive integer, got {w}")
    elif w not in _STANDARD_WEIGHTS:
        raise ValueError(f"EDP weight must be one of {_STANDARD_WEIGHTS}, got {w}")
    return w


def edp(e_device_baseline, t_device, window=DEFAULT_WINDOW_S, w=1, any_weight=False):
    """Energy-delay product ``E_device_baseline * (T_device / window) ** w``."""
    _check_times(t_device, window)
    w = _check_weight(w, any_weight)
    return e_device_baseline * (t_device / window) ** w


def edp_marginal(e_impl, t_device, window=DEFAULT_WINDOW_S, w=1, any_weight=False):
    """Baseline-subtracted variant ``E_impl * (T_device / window) ** (w - 1)``."""
    _check_times(t_device, window)
    w = _check_weight(w, any_weight)
    return e_impl * (t_device / window) ** (w - 1)


@dataclass
class EnergyReport:
    e_baseline: float
    e_device_baseline: float
    window: float
    t_device: float
    e_impl: float
    edp: dict[int, float]
    edp_marginal: dict[int, float] = field(default_factory=dict)
    anomalies: list[str] = field(default_factory=list)

    def as_flat(self) -> dict:
        out = {
            "E_baseline_J": self.e_baseline,
            "E_device_baseline_J": self.e_device_baseline,
            "delta_T3_s": self.window,
            "T_device_s": self.t_device,
            "E_impl_J": self.e_impl,
        }
        for w in sorted(self.edp):
            out[f"edp_w{w}"] = self.edp[w]
        for w in sorted(self.edp_marginal):
            out[f"edp_marginal_w{w}"] = self.edp_marginal[w]
        out["anomalies"] = ";".join(self.anomalies)
        return out

    def to_kv(self) -> str:
        return "\n".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
                         for k, v in self.as_flat().items())

    def to_json(self) -> str:
        return json.dumps(self.as_flat(), separators=(",", ":"))


def build_energy_report(
    idle: PowerTrace,
    active: PowerTrace,
    t_device: float,
    window: float = DEFAULT_WINDOW_S,
    weights: Iterable[int] = DEFAULT_EDP_WEIGHTS,
    subtract_baseline: bool = False,
    any_weight: bool = False,
) -> EnergyReport:
    """Integrate the first ``window`` seconds of each trace and derive the metrics."""
    _check_times(t_device, window)
    for name, tr in (("idle", idle), ("active", active)):
        lo, hi = tr.span
        if hi - lo < window:
            raise TraceRangeError(
                f"{name} trace spans {hi - lo:g} s, shorter than the {window:g} s window"
            )
    e_base = integrate_energy(idle, (idle.t[0], idle.t[0] + window))
    e_dev = integrate_energy(active, (active.t[0], active.t[0] + window))

    anomalies = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NegativeEnergyWarning)
        e_impl = energy_to_solution(e_dev, e_base, t_device, window)
    for wmsg in caught:
        anomalies.append("negative_energy_to_solution")
        warnings.warn(wmsg.message, wmsg.category, stacklevel=2)

    weights = sorted({_check_weight(w, any_weight) for w in weights})
    rep = EnergyReport(
        e_baseline=e_base,
        e_device_baseline=e_dev,
        window=float(window),
        t_device=float(t_device),
        e_impl=e_impl,
        edp={w: edp(e_dev, t_device, window, w, any_weight) for w in weights},
        anomalies=anomalies,
    )
    if subtract_baseline:
        rep.edp_marginal = {w: edp_marginal(e_impl, t_device, window, w, any_weight) for w in weights}
    return rep
