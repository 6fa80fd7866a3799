"""Command-line entry point: ``hitmodel {simulate,synth,fit,fit-windows}``."""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, dataio
from .errors import DimensionMismatch, HitModelError, ParseError
from .estimator import FitConfig, fit_full_run, fit_per_episode
from .model import ExposureSet, HitParams, Integrator, SimOptions, TimeGrid, simulate
from .synth import NoiseSpec, generate


class UsageError(HitModelError, ValueError):
    pass


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None


def _load_params(path) -> HitParams:
    data = _load_json(path)
    try:
        return HitParams.from_dict(data)
    except KeyError as exc:
        raise ParseError(f"{path}: missing parameter {exc}") from None


def _params_from_args(args) -> HitParams:
    if args.params:
        return _load_params(args.params)
    if None in (args.D, args.P, args.I0):
        raise UsageError("give --params FILE or all of --c, --D, --P, --I0")
    return HitParams(tuple(args.c or ()), args.D, args.P, args.I0)


def _sim_options(args) -> SimOptions:
    return SimOptions(Integrator(args.integrator), args.blowup_cap, not args.no_clamp)


def _fit_config(args) -> FitConfig:
    kwargs = {}
    if args.bounds:
        data = _load_json(args.bounds)
        unknown = set(data) - {"c", "D", "P", "I0"}
        if unknown:
            raise UsageError(f"unknown keys in bounds file: {sorted(unknown)}")
        for key, field in (("c", "c_bounds"), ("D", "D_bounds"), ("P", "P_bounds"),
                           ("I0", "I0_bounds")):
            if key in data:
                value = data[key]
                kwargs[field] = (tuple(map(tuple, value)) if value and isinstance(value[0], list)
                                 else tuple(value))
    return FitConfig(n_starts=args.starts, seed=args.seed, refine_max_iters=args.refine_iters,
                     n_refine=args.n_refine, fit_I0=not args.fix_I0,
                     chain_I0=getattr(args, "chain_I0", False), **kwargs)


def _step_days(args) -> int:
    if args.dt != int(args.dt) or args.dt < 1:
        raise UsageError(f"--dt must be a whole number of days for file data, got {args.dt:g}")
    return int(args.dt)


def _exposures(args, grid: TimeGrid | None, inputs: dict) -> ExposureSet:
    """Exposure channels from --exposures and/or a --schedule impulse channel."""
    step = _step_days(args)
    if args.exposures:
        inputs["exposures"] = args.exposures
        exposures = dataio.read_exposures(args.exposures, args.missing, step)
    elif grid is not None:
        exposures = ExposureSet.empty(grid)
    else:
        if not (args.start and args.end):
            raise UsageError("give --exposures, or --start and --end to define the grid")
        t0 = _dt.date.fromisoformat(args.start)
        span = (_dt.date.fromisoformat(args.end) - t0).days
        if span < step or span % step:
            raise UsageError("--end must be a positive whole number of steps after --start")
        exposures = ExposureSet.empty(TimeGrid(t0, span // step, float(step)))
    if getattr(args, "impulse_channel", None):
        if not args.schedule:
            raise UsageError("--impulse-channel needs --schedule")
        inputs["schedule"] = args.schedule
        exposures = dataio.with_impulse_channel(exposures, dataio.read_schedule(args.schedule),
                                                args.impulse_channel, args.impulse_magnitude)
    return exposures


def _observations(args, inputs):
    inputs["counts"] = args.counts
    observed = dataio.read_counts(args.counts, args.missing, _step_days(args))
    if args.exposures:
        exposures = _exposures(args, None, inputs)
        observed, exposures = dataio.align(observed, exposures)
    else:
        exposures = _exposures(args, observed.grid, inputs)
    return observed, exposures


def _write_report(out_dir: Path, args, inputs: dict, config: FitConfig | None,
                  options: SimOptions, results, started: float, extra=None) -> Path:
    report = {
        "tool": "hitmodel",
        "version": __version__,
        "command": args.command,
        "inputs": {role: {"path": str(path), "sha256": _digest(path)}
                   for role, path in sorted(inputs.items())},
        "config": {
            "fit": config.to_dict() if config else None,
            "simulation": {"integrator": options.integrator.value,
                           "blowup_cap": options.blowup_cap,
                           "clamp_nonnegative": options.clamp_nonnegative},
            "dt": args.dt,
            "missing_policy": dataio.MissingPolicy(args.missing).value,
            "impulse_channel": getattr(args, "impulse_channel", None),
            "impulse_magnitude": getattr(args, "impulse_magnitude", None),
        },
        "results": [r.to_dict() for r in results],
        "wall_clock_seconds": round(time.perf_counter() - started, 6),
    }
    if extra:
        report.update(extra)
    path = out_dir / "report.json"
    path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _recovery(true: HitParams, fitted: HitParams) -> dict:
    a, b = true.as_vector(), fitted.as_vector()
    names = [f"c[{i}]" for i in range(true.n_channels)] + ["D", "P", "I0"]
    rel = {n: (abs(y - x) / abs(x) if x != 0 else abs(y - x)) for n, x, y in zip(names, a, b)}
    return {"true_params": true.to_dict(), "relative_error": rel,
            "max_relative_error": max(rel.values())}


def cmd_simulate(args) -> int:
    inputs = {}
    params = _params_from_args(args)
    if args.params:
        inputs["params"] = args.params
    exposures = _exposures(args, None, inputs)
    series = simulate(params, exposures, _sim_options(args))
    out = _out_dir(args)
    dataio.write_counts(series, out / "simulated.csv")
    print(out / "simulated.csv")
    return 0


def cmd_synth(args) -> int:
    inputs = {}
    params = _params_from_args(args)
    exposures = _exposures(args, None, inputs)
    options = _sim_options(args)
    sigma = args.sigma
    if args.sigma_frac is not None:
        sigma = args.sigma_frac * float(np.max(simulate(params, exposures, options).values))
    noise = NoiseSpec.gaussian(sigma, args.seed) if sigma > 0 else NoiseSpec()
    series = generate(params, exposures, noise, options)
    out = _out_dir(args)
    dataio.write_counts(series, out / "counts.csv")
    dataio.write_exposures(exposures, out / "exposures.csv")
    (out / "params.json").write_text(
        json.dumps({**params.to_dict(), "channels": exposures.names,
                    "noise": {"kind": noise.kind.value, "sigma": noise.sigma, "seed": noise.seed}},
                   sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(out / "counts.csv")
    return 0


def cmd_fit(args) -> int:
    started = time.perf_counter()
    inputs = {}
    observed, exposures = _observations(args, inputs)
    config, options = _fit_config(args), _sim_options(args)
    true = None
    if args.true_params:
        inputs["true_params"] = args.true_params
        true = _load_params(args.true_params)
        if true.n_channels != exposures.n_channels:
            raise DimensionMismatch(
                f"params file has {true.n_channels} media coefficients, exposures have "
                f"{exposures.n_channels} channels ({', '.join(exposures.names) or 'none'})"
            )
    result = fit_full_run(observed, exposures, config, options)
    out = _out_dir(args)
    dataio.export_fit_curve(result, observed, exposures, out / "fit_curve.csv", options)
    extra = {"channels": exposures.names}
    if true is not None:
        extra["recovery"] = _recovery(true, result.params)
    _write_report(out, args, inputs, config, options, [result], started, extra)
    print(out / "report.json")
    return 0


def cmd_fit_windows(args) -> int:
    started = time.perf_counter()
    inputs = {}
    observed, exposures = _observations(args, inputs)
    inputs["schedule"] = args.schedule
    schedule = dataio.read_schedule(args.schedule)
    config, options = _fit_config(args), _sim_options(args)
    results = fit_per_episode(observed, exposures, schedule, config, options)
    out = _out_dir(args)
    dataio.export_episode_params(results, out / "episode_params.csv", exposures.names)
    dataio.export_fit_curve(results, observed, exposures, out / "fit_curve.csv", options)
    _write_report(out, args, inputs, config, options, results, started,
                  {"channels": exposures.names})
    print(out / "episode_params.csv")
    return 0


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    defaults = FitConfig()
    parser = argparse.ArgumentParser(prog="hitmodel", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--exposures", help="exposures CSV (date,channel,value)")
    common.add_argument("--schedule", help="broadcast schedule CSV (episode,date)")
    common.add_argument("--impulse-channel", metavar="NAME",
                        help="add a channel that is 1 on broadcast days (needs --schedule)")
    common.add_argument("--impulse-magnitude", type=float, default=1.0)
    common.add_argument("--missing", choices=[p.value for p in dataio.MissingPolicy],
                        default="error", help="missing-day policy (default: error)")
    common.add_argument("--dt", type=float, default=1.0, help="grid step in days")
    common.add_argument("--integrator", choices=[i.value for i in Integrator], default="euler")
    common.add_argument("--blowup-cap", type=float, default=1e12)
    common.add_argument("--no-clamp", action="store_true",
                        help="allow negative interest instead of clamping at 0")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default=".")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--params", help="JSON file with c, D, P, I0")
    model.add_argument("--c", type=float, nargs="*")
    model.add_argument("--D", type=float)
    model.add_argument("--P", type=float)
    model.add_argument("--I0", type=float)
    model.add_argument("--start", help="first grid date when no exposures file is given")
    model.add_argument("--end", help="last grid date when no exposures file is given")

    fitting = argparse.ArgumentParser(add_help=False)
    fitting.add_argument("--counts", required=True, help="observed counts CSV (date,count)")
    fitting.add_argument("--starts", type=int, default=defaults.n_starts)
    fitting.add_argument("--n-refine", type=int, default=defaults.n_refine)
    fitting.add_argument("--refine-iters", type=int, default=defaults.refine_max_iters)
    fitting.add_argument("--bounds", help="JSON file with [lo, hi] for c, D, P and/or I0")
    fitting.add_argument("--fix-I0", action="store_true",
                         help="take I0 from the first observation of each window")

    p = sub.add_parser("simulate", parents=[common, model], help="integrate the model")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("synth", parents=[common, model], help="write a synthetic data set")
    p.add_argument("--sigma", type=float, default=0.0, help="Gaussian noise s.d.")
    p.add_argument("--sigma-frac", type=float, help="noise s.d. as a fraction of the peak")
    p.set_defaults(func=cmd_synth)
    p = sub.add_parser("fit", parents=[common, fitting], help="fit over the whole series")
    p.add_argument("--true-params", help="params JSON to compare the fit against")
    p.set_defaults(func=cmd_fit)
    p = sub.add_parser("fit-windows", parents=[common, fitting],
                       help="fit each broadcast-to-broadcast window")
    p.add_argument("--chain-I0", action="store_true",
                   help="start each window from the previous window's model value")
    p.set_defaults(func=cmd_fit_windows)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "fit-windows" and not args.schedule:
        parser.error("fit-windows requires --schedule")
    try:
        return args.func(args)
    except HitModelError as exc:
        print(f"error {exc.code}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
