"""Benchmark harness: timed integrator runs, sweeps, DP/EX ratios, energy.

Timings cover the kernel phase of each step (both passes, including the
write-back of the derivative arrays).  Predictor and corrector are timed
separately so that each report carries the kernel's share of the step.
"""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .core import ParticleSystem, Precision, SimConfig, make_plummer, make_two_body
from .hermite import initialize, integrate, step
from .kernel import DEFAULT_FLOP_MODEL, FlopModel, arithmetic_intensity, default_workers, flop_count
from .powerlog import (
    DEFAULT_EDP_WEIGHTS,
    DEFAULT_WINDOW_S,
    EnergyReport,
    PowerTrace,
    build_energy_report,
    read_trace,
)

__all__ = [
    "DEFAULT_RUNS",
    "DEFAULT_STEPS",
    "DEFAULT_SWEEP_N",
    "CSV_COLUMNS",
    "BenchReport",
    "IncompleteMatrixError",
    "make_initial_system",
    "run_benchmark",
    "sweep",
    "ratio_dp_ex",
    "attach_energy",
    "energy_run",
    "reports_to_csv",
    "reports_from_csv",
    "ratios_to_csv",
]

DEFAULT_RUNS = 10
DEFAULT_STEPS = 1
DEFAULT_SWEEP_N = (1024, 2048, 4096, 8192, 16384, 32768, 65536)
DEFAULT_PLUMMER_SOFTENING = 1.0 / 128
DEFAULT_PLUMMER_DT = 1.0 / 1024
DEFAULT_TWOBODY_DT = 2.0 * math.pi / 1000

CSV_COLUMNS = (
    "n",
    "precision",
    "t_mean_s",
    "t_min_s",
    "t_stddev_s",
    "kernel_fraction",
    "gflops",
    "ai_flops_per_byte",
)


class IncompleteMatrixError(ValueError):
    pass


@dataclass
class BenchReport:
    n: int
    precision: Precision
    runs: int
    steps: int
    t_mean: float
    t_min: float
    t_stddev: float
    kernel_fraction: float
    gflops: float
    arithmetic_intensity: float
    energy: Optional[EnergyReport] = None
    final_state: Optional[ParticleSystem] = field(default=None, repr=False, compare=False)

    def row(self) -> dict:
        return {
            "n": self.n,
            "precision": Precision(self.precision).value,
            "t_mean_s": self.t_mean,
            "t_min_s": self.t_min,
            "t_stddev_s": self.t_stddev,
            "kernel_fraction": self.kernel_fraction,
            "gflops": self.gflops,
            "ai_flops_per_byte": self.arithmetic_intensity,
        }

    def to_json(self) -> str:
        d = self.row()
        d["runs"] = self.runs
        d["steps"] = self.steps
        if self.energy is not None:
            d["energy"] = self.energy.as_flat()
        return json.dumps(d, separators=(",", ":"))


def make_initial_system(ic: str, n: int, seed: int, eccentricity: float = 0.0) -> ParticleSystem:
    if ic == "plummer":
        return make_plummer(n, seed)
    if ic == "twobody":
        if n != 2:
            raise ValueError(f"the twobody initial condition has n=2, got n={n}")
        return make_two_body(eccentricity)
    raise ValueError(f"unknown initial condition {ic!r}")


def run_benchmark(
    n: int,
    precision=Precision.DP,
    runs: int = DEFAULT_RUNS,
    steps: int = DEFAULT_STEPS,
    seed: int = 0,
    workers: Optional[int] = None,
    softening: Optional[float] = None,
    eta: float = 0.01,
    dt: Optional[float] = None,
    adaptive: bool = False,
    ic: str = "plummer",
    eccentricity: float = 0.0,
    model: FlopModel = DEFAULT_FLOP_MODEL,
) -> BenchReport:
    """Time ``runs`` repetitions of ``steps`` integrator steps.

    Every run starts from the same initialized state, after one untimed
    warm-up step, so the simulated trajectory is identical across runs and
    worker counts.
    """
    if n < 2:
        raise ValueError("benchmarks need n >= 2")
    if runs < 1 or steps < 1:
        raise ValueError("runs and steps must be >= 1")
    if workers is None:
        workers = default_workers()
    if workers < 1:
        raise ValueError(f"invalid worker count {workers}")
    if softening is None:
        softening = DEFAULT_PLUMMER_SOFTENING if ic == "plummer" else 0.0
    if dt is None:
        dt = DEFAULT_PLUMMER_DT if ic == "plummer" else DEFAULT_TWOBODY_DT
    cfg = SimConfig(
        softening=softening, eta=eta, dt=dt, adaptive=adaptive,
        precision=Precision(precision), workers=workers,
    )

    start = make_initial_system(ic, n, seed, eccentricity)
    initialize(start, cfg)
    step(start.copy(), cfg)  # warm-up

    times, kernel_total, step_total = [], 0.0, 0.0
    final = None
    for _ in range(runs):
        final, recs = integrate(start.copy(), cfg, steps)
        k = sum(r.kernel_seconds for r in recs)
        times.append(k)
        kernel_total += k
        step_total += sum(r.total_seconds for r in recs)

    t_mean = statistics.fmean(times)
    flops = flop_count(n, model) * steps
    return BenchReport(
        n=n,
        precision=cfg.precision,
        runs=runs,
        steps=steps,
        t_mean=t_mean,
        t_min=min(times),
        t_stddev=statistics.pstdev(times) if runs > 1 else 0.0,
        kernel_fraction=min(1.0, kernel_total / step_total) if step_total > 0 else 1.0,
        gflops=flops / t_mean / 1e9 if t_mean > 0 else math.inf,
        arithmetic_intensity=arithmetic_intensity(n, model),
        final_state=final,
    )


def sweep(n_list: Iterable[int] = DEFAULT_SWEEP_N, precisions=(Precision.DP, Precision.EX),
          progress=None, **kwargs) -> list[BenchReport]:
    """One report per ``(n, precision)`` cell, timed strictly one after another."""
    n_list = list(n_list)
    for n in n_list:
        if n < 2:
            raise ValueError(f"sweep sizes must be >= 2, got {n}")
    reports = []
    for n in n_list:
        for prec in precisions:
            rep = run_benchmark(n, prec, **kwargs)
            reports.append(rep)
            if progress is not None:
                progress(rep)
    return reports


def ratio_dp_ex(reports: Sequence[BenchReport]) -> list[tuple[int, float]]:
    """``t_mean(DP) / t_mean(EX)`` for every n, sorted by n."""
    table: dict[int, dict[Precision, float]] = {}
    for r in reports:
        table.setdefault(r.n, {})[Precision(r.precision)] = r.t_mean
    out = []
    for n in sorted(table):
        cell = table[n]
        missing = [p.value for p in Precision if p not in cell]
        if missing:
            raise IncompleteMatrixError(f"n={n} lacks precision(s) {', '.join(missing)}")
        out.append((n, cell[Precision.DP] / cell[Precision.EX]))
    return out


def attach_energy(report: BenchReport, idle: PowerTrace, active: PowerTrace,
                  window: float = DEFAULT_WINDOW_S, weights=DEFAULT_EDP_WEIGHTS,
                  subtract_baseline: bool = False, any_weight: bool = False) -> BenchReport:
    """Set ``report.energy`` using the report's mean kernel time as T_device."""
    report.energy = build_energy_report(
        idle, active, report.t_mean, window, weights, subtract_baseline, any_weight
    )
    return report


def energy_run(idle_trace, active_trace, window: float = DEFAULT_WINDOW_S,
               weights=DEFAULT_EDP_WEIGHTS, subtract_baseline: bool = False,
               **bench_kwargs) -> BenchReport:
    """Benchmark one configuration, then combine its timing with the two traces."""
    idle = read_trace(idle_trace) if not isinstance(idle_trace, PowerTrace) else idle_trace
    active = read_trace(active_trace) if not isinstance(active_trace, PowerTrace) else active_trace
    report = run_benchmark(**bench_kwargs)
    return attach_energy(report, idle, active, window, weights, subtract_baseline)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def reports_to_csv(reports: Iterable[BenchReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.row().items()})
    return buf.getvalue()


def reports_from_csv(text: str) -> list[BenchReport]:
    """Parse CSV written by :func:`reports_to_csv`.

    ``runs`` and ``steps`` are not part of the CSV and come back as 0.
    """
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(BenchReport(
            n=int(row["n"]),
            precision=Precision(row["precision"]),
            runs=0,
            steps=0,
            t_mean=float(row["t_mean_s"]),
            t_min=float(row["t_min_s"]),
            t_stddev=float(row["t_stddev_s"]),
            kernel_fraction=float(row["kernel_fraction"]),
            gflops=float(row["gflops"]),
            arithmetic_intensity=float(row["ai_flops_per_byte"]),
        ))
    return out


def ratios_to_csv(ratios: Iterable[tuple[int, float]]) -> str:
    lines = ["n,ratio"]
    lines += [f"{n},{r!r}" for n, r in ratios]
    return "\n".join(lines) + "\n"
