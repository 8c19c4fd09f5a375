"""Command-line interface: ``nbrepro {estimate,ci,gof,simulate,synth,replay}``.

Every run writes a ``<out>.manifest.json`` next to its main output; passing
that file to ``nbrepro replay`` re-runs the same command.

Exit codes: 0 ok, 1 usage/config, 2 input/parse, 3 insufficient data, 4 internal.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import math
import os
import platform
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig, bootstrap_ci
from .cluster_sim import Scenario, baseline_of, initial_cohort, run_scenario, write_fans
from .estimators import run_pipeline
from .gof import UnderdispersionError, gof_test, write_results
from .ingest import (
    ConfigError,
    DateRangeError,
    GofSample,
    PanelError,
    PipelineConfig,
    config_from_mapping,
    load_config,
    load_panel,
    parse_band,
    parse_float_list,
    read_kv_file,
    select_gof_districts,
    write_panel,
)
from .negbin import NegBinParams, ParameterDomainError
from .rng import substream
from .synthetic import synthetic_panel

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class InsufficientDataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _default_threads() -> int:
    env = os.environ.get("NBREPRO_THREADS")
    return int(env) if env else (os.cpu_count() or 1)


def _add_pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV with columns date,district_id,cases")
    p.add_argument("--config", help="key = value file with pipeline settings")
    p.add_argument("--tau", type=int, help="reporting delay in days (default 7)")
    p.add_argument("--gen-time", type=int, help="generation time in days (default 4)")
    p.add_argument("--window", type=int, help="weekly-sum and smoothing window (default 7)")
    p.add_argument("--fill-missing", action="store_true", default=None, help="treat missing rows as zero")
    p.add_argument("--no-smooth", action="store_true", help="solve from unsmoothed moments")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nbrepro", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (never changes results)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate NB(p, r) per date for each reporting rate")
    _add_pipeline_args(p)
    p.add_argument("--p0", help="comma-separated reporting rates (default 0.2,0.35,0.5)")
    p.add_argument("--out", required=True, help="output CSV of estimates")
    p.add_argument("--probs", help="output CSV of derived probabilities (default <out>_probs.csv)")
    p.add_argument("--json", action="store_true", help="also write a JSON mirror of the estimates")
    p.add_argument("--plot", help="directory for PNG line plots")

    p = sub.add_parser("ci", help="bootstrap confidence intervals for R0")
    _add_pipeline_args(p)
    p.add_argument("--p0", type=float, default=0.2)
    p.add_argument("--B", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--mode", choices=("fixed", "recursive"), default="recursive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="PNG file for the band plot")

    p = sub.add_parser("gof", help="goodness-of-fit test on district weekly sums")
    _add_pipeline_args(p)
    p.add_argument("--a", type=float, default=5.0)
    p.add_argument("--band", help="lo:hi band of mean daily cases (default 15:25)")
    p.add_argument("--min-districts", type=int, help="minimum districts per date (default 75)")
    p.add_argument("--B", type=int, default=499)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="cluster-tracing scenario simulation")
    _add_pipeline_args(p)
    p.add_argument("--scenario", help="key = value scenario file")
    p.add_argument("--start", help="first infection date (ISO)")
    p.add_argument("--end", help="last generation date (ISO)")
    p.add_argument("--p0", type=float)
    p.add_argument("--cs", type=float, help="trace when reported secondaries exceed this")
    p.add_argument("--ceff", type=float, help="tracing effectiveness in [0, 1]")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--seed-cases", type=int, help="initial cohort (default: from the panel)")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="PNG file for the fan plot")

    p = sub.add_parser("synth", help="write a synthetic panel from the branching model")
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--r", type=float, default=1 / 9)
    p.add_argument("--p0", type=float, default=0.2)
    p.add_argument("--districts", type=int, default=400)
    p.add_argument("--days", type=int, default=120)
    p.add_argument("--level", type=float, default=300.0, help="initial daily cases per district")
    p.add_argument("--start", default="2020-04-01")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    return parser


def _pipeline_config(args: argparse.Namespace, p0_grid: Sequence[float] | None = None) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    overrides: dict = {}
    for name in ("tau", "gen_time", "window", "fill_missing"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "no_smooth", False):
        overrides["smooth_moments"] = False
    if p0_grid is not None:
        overrides["p0_grid"] = tuple(p0_grid)
    if getattr(args, "band", None):
        overrides["gof_band"] = parse_band(args.band)
    if getattr(args, "min_districts", None) is not None:
        overrides["gof_min_districts"] = args.min_districts
    return config_from_mapping(overrides, base=config) if overrides else config


def _load(args: argparse.Namespace, config: PipelineConfig):
    if not Path(args.input).is_file():
        raise FileNotFoundError(f"input file not found: {args.input}")
    return load_panel(args.input, config)


def cmd_estimate(args: argparse.Namespace) -> dict:
    grid = parse_float_list(args.p0) if args.p0 else None
    config = _pipeline_config(args, grid)
    panel = _load(args, config)
    series = run_pipeline(panel, config)
    if not any(rec.per_p0 for rec in series):
        raise InsufficientDataError("no date has enough data for the estimators")
    series.write_csv(args.out)
    outputs = [args.out]
    probs = args.probs or str(Path(args.out).with_name(Path(args.out).stem + "_probs.csv"))
    cols, rows = series.probability_rows()
    _write_rows(probs, cols, rows)
    outputs.append(probs)
    if args.json:
        jpath = str(Path(args.out).with_suffix(".json"))
        series.write_json(jpath)
        outputs.append(jpath)
    if args.plot:
        from . import plots

        outputs += plots.plot_estimates(series, args.plot)
    return {"config": config.as_dict(), "outputs": outputs}


def cmd_ci(args: argparse.Namespace) -> dict:
    bc = BootstrapConfig(B=args.B, alpha=args.alpha, p0=args.p0, mode=args.mode, seed=args.seed)
    config = _pipeline_config(args, (args.p0,))
    panel = _load(args, config)
    series = run_pipeline(panel, config)
    band = bootstrap_ci(panel, series, bc)
    if len(band) == 0:
        raise InsufficientDataError(f"no date has solvable parameters for p0={args.p0}")
    band.write_csv(args.out)
    outputs = [args.out]
    if args.plot:
        from . import plots

        outputs.append(plots.plot_band(band, args.plot))
    return {"config": config.as_dict(), "bootstrap": vars_of(bc), "outputs": outputs}


def cmd_gof(args: argparse.Namespace) -> dict:
    config = _pipeline_config(args)
    panel = _load(args, config)
    lag = config.gen_time + config.window - 1
    results = []
    for i in range(lag, panel.n_dates):
        sel = select_gof_districts(panel, i, config)
        if not isinstance(sel, GofSample):
            continue
        try:
            results.append(gof_test(sel, a=args.a, B_gof=args.B, seed=substream(args.seed, i)))
        except UnderdispersionError as exc:
            print(f"nbrepro: {panel.dates[i]}: skipped ({exc})", file=sys.stderr)
    write_results(results, args.out)
    n_rej = sum(r.reject_at_5pct for r in results)
    print(f"{len(results)} admissible dates, {n_rej} rejections at 5%", file=sys.stderr)
    return {"config": config.as_dict(), "outputs": [args.out]}


def _scenario_values(args: argparse.Namespace) -> dict:
    values: dict = {}
    if args.scenario:
        values.update(read_kv_file(args.scenario))
    cli = {
        "start": args.start, "end": args.end, "p0": args.p0, "cs": args.cs, "ceff": args.ceff,
        "trials": args.trials, "seed": args.seed, "seed_cases": args.seed_cases,
    }
    values.update({k: v for k, v in cli.items() if v is not None})
    return values


def cmd_simulate(args: argparse.Namespace) -> dict:
    values = _scenario_values(args)
    config = _pipeline_config(args)
    config = config_from_mapping(values, base=config)
    for key in ("start", "end"):
        if key not in values:
            raise UsageError(f"--{key} is required (flag or scenario file)")
    try:
        start = dt.date.fromisoformat(str(values["start"]))
        end = dt.date.fromisoformat(str(values["end"]))
        p0 = float(values.get("p0", 0.2))
        cs = float(values.get("cs", math.inf))
        c_eff = float(values.get("ceff", values.get("c_eff", 0.0)))
        trials = int(values.get("trials", 10_000))
        seed = int(values.get("seed", 0))
    except ValueError as exc:
        raise ConfigError(f"bad scenario value: {exc}") from None
    config = config_from_mapping({"p0_grid": (p0,)}, base=config)
    panel = _load(args, config)
    series = run_pipeline(panel, config)
    params = series.params_by_effective_date(p0)
    seed_cases = values.get("seed_cases")
    seed_cases = int(seed_cases) if seed_cases is not None else initial_cohort(panel, start, p0, config)
    scn = Scenario(start=start, end=end, params_series=params, p0=p0, cs=cs, c_eff=c_eff,
                   trials=trials, seed=seed, seed_cases=seed_cases, gen_time=config.gen_time)
    threads = args.threads or _default_threads()
    fan = run_scenario(scn, threads=threads)
    base = run_scenario(baseline_of(scn), threads=threads)
    write_fans(fan, base, args.out)
    outputs = [args.out]
    if args.plot:
        from . import plots

        outputs.append(plots.plot_fans(fan, base, args.plot, title=f"CS={cs:g}, C_eff={c_eff:g}, p0={p0:g}"))
    scenario = {"start": start.isoformat(), "end": end.isoformat(), "p0": p0, "cs": cs, "c_eff": c_eff,
                "trials": trials, "seed": seed, "seed_cases": seed_cases}
    return {"config": config.as_dict(), "scenario": scenario, "outputs": outputs}


def cmd_synth(args: argparse.Namespace) -> dict:
    panel = synthetic_panel(
        NegBinParams(args.p, args.r), args.p0, n_districts=args.districts, n_days=args.days,
        initial_level=args.level, start=dt.date.fromisoformat(args.start), seed=args.seed,
    )
    write_panel(panel, args.out)
    return {"outputs": [args.out]}


def vars_of(obj) -> dict:
    return {k: getattr(obj, k) for k in obj.__dataclass_fields__}


def _write_rows(path: str, cols: list[str], rows: list[list[str]]) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        w.writerows(rows)


COMMANDS = {
    "estimate": cmd_estimate,
    "ci": cmd_ci,
    "gof": cmd_gof,
    "simulate": cmd_simulate,
    "synth": cmd_synth,
}


def _write_manifest(argv: list[str], args: argparse.Namespace, info: dict, started: str) -> None:
    inputs = {}
    for name in ("input", "config", "scenario"):
        path = getattr(args, name, None)
        if path:
            inputs[path] = _sha256(path)
    manifest = {
        "command": args.command,
        "argv": argv,
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "inputs": inputs,
        "outputs": {p: _sha256(p) for p in info.get("outputs", [])},
        "started": started,
        "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
    }
    for key in ("config", "bootstrap", "scenario"):
        if key in info:
            manifest[key] = info[key]
    Path(str(args.out) + ".manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        try:
            recorded = json.loads(Path(args.manifest).read_text())["argv"]
        except (OSError, ValueError, KeyError) as exc:
            print(f"nbrepro: cannot read manifest {args.manifest}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        return main(recorded)
    started = dt.datetime.now(dt.timezone.utc).isoformat()
    try:
        info = COMMANDS[args.command](args)
        _write_manifest(argv, args, info, started)
    except (UsageError, ConfigError, ParameterDomainError) as exc:
        print(f"nbrepro: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"nbrepro: I/O error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PanelError, OSError) as exc:
        print(f"nbrepro: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InsufficientDataError, DateRangeError, UnderdispersionError) as exc:
        print(f"nbrepro: insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"nbrepro: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
