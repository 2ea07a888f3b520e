"""Command-line entry point: ``pqwalk simulate`` and ``pqwalk analyze``.

Exit codes
----------
0
    success (a fit that is flagged ``"unstable"`` still exits 0)
2
    invalid flags, unreadable or missing inputs, data too short to analyze
3
    numerical contract violation during simulation (norm drift, bad density)
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (Region, coarse_grain, collapse_quality, crossover_time, exponent_scan,
                       fit_crossover, fit_scaling_function, moment_collapse_quality,
                       rescale_distribution, write_collapse_csv, write_json)
from .ensemble import MANIFEST_FILE, RunConfig, read_result, run_ensemble, write_result
from .errors import NumericalContractError, WalkError
from .policy import StepPolicy

log = logging.getLogger("pqwalk")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

# flag name -> key in the flat config mapping accepted by --config
RUN_FLAGS = ("scheme", "p", "q", "l", "steps", "configs", "seed", "snap", "record_every",
             "density_mode", "entropy_average")


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_run_flags(ap: argparse.ArgumentParser, scan: bool = False) -> None:
    g = ap.add_argument_group("run configuration (overrides --config)")
    g.add_argument("--config", type=Path, help="JSON file: flat flag mapping or a run manifest")
    g.add_argument("--scheme", choices=["I", "II", "fixed"])
    if scan:
        g.add_argument("--p", type=_float_list, required=True,
                       help="comma-separated persistence values to scan")
    else:
        g.add_argument("--p", type=float, help="persistence probability")
    g.add_argument("--q", type=float, help="P(l=1) in the Scheme II random branch")
    g.add_argument("--l", type=int, choices=[1, 2], help="step length for --scheme fixed")
    g.add_argument("--steps", type=int, help="number of time steps T")
    g.add_argument("--configs", type=int, help="number of disorder configurations N")
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--snap", type=_int_list, help="comma-separated snapshot times")
    g.add_argument("--record-every", dest="record_every", type=int)
    g.add_argument("--density-mode", dest="density_mode", choices=["hermitian", "paper"])
    g.add_argument("--entropy-average", dest="entropy_average",
                   choices=["mean_rho", "mean_entropy"])
    g.add_argument("--threads", type=int, help="cap on worker threads")


def _flatten_config(d: dict) -> dict:
    """Accept a manifest, its ``config`` block, or a flat flag mapping."""
    if "config" in d:
        d = d["config"]
    if "policy" not in d:
        return dict(d)
    pol = d["policy"]
    flat = {"scheme": pol.get("scheme"), "p": pol.get("p"), "q": pol.get("q"),
            "l": pol.get("fixed_l"), "steps": d.get("T"), "configs": d.get("N"),
            "seed": d.get("master_seed"), "snap": d.get("snapshot_times"),
            "record_every": d.get("record_every"), "density_mode": d.get("density_mode"),
            "entropy_average": d.get("entropy_average")}
    return {k: v for k, v in flat.items() if v is not None}


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge ``--config`` and explicit flags into a :class:`RunConfig`."""
    flat: dict = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                flat = _flatten_config(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read --config: {exc}")
        unknown = set(flat) - set(RUN_FLAGS)
        if unknown:
            raise UsageError(f"unknown keys in --config: {sorted(unknown)}")
    for name in RUN_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            flat[name] = v
    if "steps" not in flat:
        raise UsageError("--steps is required")
    policy = StepPolicy(flat.get("scheme", "I"), flat.get("p", 0.5), flat.get("q", 0.5),
                        flat.get("l", 1))
    return RunConfig(policy, T=int(flat["steps"]), N=int(flat.get("configs", 1)),
                     master_seed=int(flat.get("seed", 0)),
                     snapshot_times=flat.get("snap"),
                     density_mode=flat.get("density_mode", "hermitian"),
                     record_every=int(flat.get("record_every", 1)),
                     entropy_average=flat.get("entropy_average", "mean_rho"))


def cmd_simulate(args) -> int:
    config = build_config(args)
    result = run_ensemble(config, workers=args.threads)
    manifest = write_result(result, args.out)
    log.info("wrote %s to %s (%.2fs)", ", ".join(manifest["files"]), args.out, result.wall_time)
    return EXIT_OK


def _load_run(path: Path):
    if not (Path(path) / MANIFEST_FILE).exists():
        raise UsageError(f"{path} has no {MANIFEST_FILE}; run 'pqwalk simulate' first")
    return read_result(path)


def _emit(report: dict, out) -> None:
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        write_json(report, out)
    print(json.dumps(report, indent=2, default=float))


def cmd_fit(args) -> int:
    res = _load_run(args.inp)
    fit = fit_crossover((res.times, res.mean_x2), args.tmin)
    report = {"input": str(args.inp), "policy": res.config.policy.to_dict(),
              "configs": res.count, **fit.to_dict()}
    _emit(report, args.out if args.out is not None else Path(args.inp) / "fit.json")
    return EXIT_OK


def cmd_collapse(args) -> int:
    res = _load_run(args.inp)
    times = sorted(res.snapshots) if args.times is None else args.times
    missing = [t for t in times if t not in res.snapshots]
    if missing:
        raise UsageError(f"no snapshots for t={missing} in {args.inp}")
    snaps = [coarse_grain(res.snapshots[t], args.coarse) for t in times]
    out_dir = Path(args.out) if args.out is not None else Path(args.inp)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = []
    for gamma in args.gamma or [0.5, 1.0]:
        curves = [rescale_distribution(s, gamma) for s in snaps]
        name = f"collapse_g{gamma:g}.csv"
        write_collapse_csv(curves, out_dir / name)
        row = {"gamma": gamma, "file": name}
        for region in Region:
            try:
                row[region.value] = collapse_quality(curves, region)
            except WalkError as exc:
                row[region.value] = None
                log.warning("gamma=%g %s region: %s", gamma, region.value, exc)
        metrics.append(row)
    _emit({"input": str(args.inp), "times": times, "coarse": args.coarse, "metrics": metrics},
          out_dir / "collapse.json")
    return EXIT_OK


def cmd_timescale(args) -> int:
    runs, series = [], {}
    for path in args.inp:
        res = _load_run(path)
        pol = res.config.policy
        scale = pol.p if args.scale == "p" else 1.0 - pol.p
        t_star = crossover_time((res.times, res.mean_x2), args.delta)
        runs.append({"input": str(path), "p": pol.p, "scale": scale, "t_star": t_star,
                     "t_star_times_scale": t_star * scale,
                     "reached": t_star <= int(res.times[-1])})
        if scale > 0:
            series[scale] = (res.times, res.mean_x2)
    report = {"delta": args.delta, "scale": args.scale, "runs": runs}
    if len(series) >= 2:
        report["moment_collapse"] = moment_collapse_quality(series)
        z, f = [], []
        for s, (t, m) in series.items():
            keep = (t >= args.zmin / s) & (t > 0)
            z.append(s * t[keep])
            f.append(m[keep] / t[keep] ** 2)
        z, f = np.concatenate(z), np.concatenate(f)
        try:
            report["scaling_fit"] = fit_scaling_function(z, f).to_dict()
        except WalkError as exc:
            report["scaling_fit"] = {"unstable": True, "reason": str(exc)}
    _emit(report, args.out)
    return EXIT_OK


def cmd_scan(args) -> int:
    ps = args.p
    args.p = None
    base = build_config(args)
    scan = exponent_scan(ps, base, t_min=args.tmin, workers=args.threads)
    report = {"config": base.to_dict(),
              "table": [{"p": p, "nu": nu, "residual": r} for p, nu, r in scan.table],
              "p_c_estimate": scan.p_c_estimate,
              "unstable": [f.unstable for f in scan.fits]}
    _emit(report, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pqwalk", description=__doc__.splitlines()[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog="exit codes: 0 ok, 2 usage or input error, 3 numerical")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an ensemble and write CSV/JSON output")
    _add_run_flags(sim)
    sim.add_argument("--out", type=Path, required=True, help="output directory")
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="fits and collapse on simulate output")
    asub = ana.add_subparsers(dest="action", required=True)

    fit = asub.add_parser("fit", help="crossover fit of the second moment")
    fit.add_argument("--in", dest="inp", type=Path, required=True)
    fit.add_argument("--tmin", type=int, help="first time in the fit window (default T/20)")
    fit.add_argument("--out", type=Path, help="report path (default <in>/fit.json)")
    fit.set_defaults(func=cmd_fit)

    col = asub.add_parser("collapse", help="rescaled distribution curves and metrics")
    col.add_argument("--in", dest="inp", type=Path, required=True)
    col.add_argument("--gamma", type=float, action="append",
                     help="scaling exponent; repeat for several (default 0.5 and 1.0)")
    col.add_argument("--times", type=_int_list, help="snapshot times to use (default all)")
    col.add_argument("--coarse", type=int, default=1, help="bin width in sites")
    col.add_argument("--out", type=Path, help="output directory (default <in>)")
    col.set_defaults(func=cmd_collapse)

    ts = asub.add_parser("timescale", help="crossover time of one or more runs")
    ts.add_argument("--in", dest="inp", type=Path, action="append", required=True)
    ts.add_argument("--delta", type=float, default=0.2)
    ts.add_argument("--scale", choices=["p", "1-p"], default="p")
    ts.add_argument("--zmin", type=float, default=1.0, help="lower z cut for the scaling fit")
    ts.add_argument("--out", type=Path)
    ts.set_defaults(func=cmd_timescale)

    scan = asub.add_parser("scan", help="fit nu over a grid of p values")
    _add_run_flags(scan, scan=True)
    scan.add_argument("--tmin", type=int)
    scan.add_argument("--out", type=Path)
    scan.set_defaults(func=cmd_scan)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NumericalContractError as exc:
        print(f"pqwalk: numerical contract violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, WalkError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"pqwalk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
