"""Command-line entry point: ``hermite-bench``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench
from .core import Precision, write_snapshot
from .kernel import default_workers
from .powerlog import DEFAULT_WINDOW_S, build_energy_report, read_trace


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hermite-bench",
        description="Direct N-body Hermite kernel benchmark with DP/EX backends "
                    "and power-trace energy reporting.",
    )
    ap.add_argument("--n", type=_int_list, default=list(bench.DEFAULT_SWEEP_N),
                    help="comma-separated particle counts (default: %(default)s)")
    ap.add_argument("--precision", choices=("dp", "ex", "both"), default="both")
    ap.add_argument("--runs", type=int, default=bench.DEFAULT_RUNS)
    ap.add_argument("--steps", type=int, default=bench.DEFAULT_STEPS)
    ap.add_argument("--workers", type=int, default=None,
                    help=f"kernel worker threads (default: all cores, {default_workers()})")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--softening", type=float, default=None,
                    help="softening length (default: 1/128 for plummer, 0 for twobody)")
    ap.add_argument("--eta", type=float, default=0.01)
    step_mode = ap.add_mutually_exclusive_group()
    step_mode.add_argument("--dt", type=float, default=None)
    step_mode.add_argument("--adaptive", action="store_true")
    ap.add_argument("--ic", choices=("plummer", "twobody"), default="plummer")
    ap.add_argument("--eccentricity", type=float, default=0.0,
                    help="orbital eccentricity for --ic twobody")
    ap.add_argument("--idle-trace", type=Path)
    ap.add_argument("--active-trace", type=Path)
    ap.add_argument("--baseline-window", type=float, default=DEFAULT_WINDOW_S,
                    help="measurement window in seconds (default: %(default)s)")
    ap.add_argument("--edp-weights", type=_int_list, default=[1, 3])
    ap.add_argument("--edp-subtract-baseline", action="store_true",
                    help="also report the baseline-subtracted EDP variant")
    ap.add_argument("--edp-any-weight", action="store_true",
                    help="accept EDP weights outside 1..3")
    ap.add_argument("--t-device", type=float, default=None,
                    help="skip benchmarking and report energy for this kernel time")
    ap.add_argument("--out", type=Path, help="write per-cell results as CSV")
    ap.add_argument("--ratio-out", type=Path, help="write the DP/EX ratio table as CSV")
    ap.add_argument("--json", type=Path, help="write one JSON object per line")
    ap.add_argument("--snapshot-out", type=Path, help="write the final particle state")
    return ap


def _table(reports):
    head = f"{'n':>7} {'prec':>4} {'t_mean[s]':>11} {'t_min[s]':>11} {'sd[s]':>9} " \
           f"{'kfrac':>6} {'GFLOPS':>8} {'FLOP/B':>9}"
    lines = [head]
    for r in reports:
        lines.append(
            f"{r.n:>7} {r.precision.value:>4} {r.t_mean:>11.5g} {r.t_min:>11.5g} "
            f"{r.t_stddev:>9.3g} {r.kernel_fraction:>6.3f} {r.gflops:>8.3f} "
            f"{r.arithmetic_intensity:>9.4g}"
        )
    return "\n".join(lines)


def _snapshot_path(base: Path, rep, many: bool) -> Path:
    if not many:
        return base
    return base.with_name(f"{base.stem}_n{rep.n}_{rep.precision.value}{base.suffix}")


def run(args) -> int:
    traces = (args.idle_trace, args.active_trace)
    if any(traces) and not all(traces):
        raise ValueError("--idle-trace and --active-trace must be given together")
    energy_kw = dict(
        window=args.baseline_window,
        weights=args.edp_weights,
        subtract_baseline=args.edp_subtract_baseline,
        any_weight=args.edp_any_weight,
    )

    if args.t_device is not None:
        if not all(traces):
            raise ValueError("--t-device needs --idle-trace and --active-trace")
        rep = build_energy_report(read_trace(args.idle_trace), read_trace(args.active_trace),
                                  args.t_device, **energy_kw)
        print(rep.to_kv())
        if args.json:
            args.json.write_text(rep.to_json() + "\n")
        return 0

    precisions = [Precision.DP, Precision.EX] if args.precision == "both" else [Precision(args.precision)]
    if args.ic == "twobody":
        n_list = [2]
    else:
        n_list = args.n
    idle = active = None
    if all(traces):
        idle, active = read_trace(args.idle_trace), read_trace(args.active_trace)

    def progress(rep):
        print(f"# done n={rep.n} {rep.precision.value}: t_mean={rep.t_mean:.6g} s", file=sys.stderr)

    reports = bench.sweep(
        n_list, precisions, progress=progress,
        runs=args.runs, steps=args.steps, seed=args.seed, workers=args.workers,
        softening=args.softening, eta=args.eta, dt=args.dt, adaptive=args.adaptive,
        ic=args.ic, eccentricity=args.eccentricity,
    )
    if idle is not None:
        for rep in reports:
            bench.attach_energy(rep, idle, active, **energy_kw)

    print(_table(reports))
    for rep in reports:
        if rep.energy is not None:
            print(f"\n# energy n={rep.n} {rep.precision.value}")
            print(rep.energy.to_kv())
    ratios = None
    if len(precisions) == 2:
        ratios = bench.ratio_dp_ex(reports)
        print("\n" + bench.ratios_to_csv(ratios), end="")

    if args.out:
        args.out.write_text(bench.reports_to_csv(reports))
    if args.ratio_out:
        if ratios is None:
            raise ValueError("--ratio-out needs --precision both")
        args.ratio_out.write_text(bench.ratios_to_csv(ratios))
    if args.json:
        args.json.write_text("".join(r.to_json() + "\n" for r in reports))
    if args.snapshot_out:
        for rep in reports:
            write_snapshot(rep.final_state, _snapshot_path(args.snapshot_out, rep, len(reports) > 1),
                           comment=f"n={rep.n} precision={rep.precision.value}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (ValueError, OSError, ZeroDivisionError, OverflowError) as exc:
        print(f"hermite-bench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
