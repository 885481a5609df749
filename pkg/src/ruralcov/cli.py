"""Command-line front end.

    ruralcov run     [--config FILE] [--set section.key=value ...] [--output OUT.csv]
    ruralcov figure  {2,3,5} [same options]
    ruralcov config  [--config FILE] [--set ...]      # print the resolved config

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, parse_config, parse_override, scenario_config
from .montecarlo import SweepResult, default_workers
from .scenarios import run_scenario

RESULT_HEADER = ("sweep_value", "mode", "p_cov", "ci_low", "ci_high", "n_trials", "seed")
FIGURE_SCENARIO = {2: 1, 3: 2, 5: 3}


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def emit_results(result: SweepResult, path: str | Path, cfg: RunConfig | None = None) -> Path:
    """Write the results CSV and its metadata sidecar; returns the sidecar path."""
    path = Path(path)
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_HEADER)
        for row in result.rows:
            e = row.estimate
            writer.writerow([_fmt(row.sweep_value), row.mode, _fmt(e.p_hat), _fmt(e.ci_low),
                             _fmt(e.ci_high), e.n_trials, e.seed])
    meta = {
        "version": __version__,
        "geometry_digests": result.geometry_digests,
        "notes": {k: (float(v) if isinstance(v, float) else v) for k, v in result.notes.items()},
    }
    if cfg is not None:
        meta["config"] = cfg.to_dict()
        meta["provenance"] = cfg.provenance()
    side = sidecar_path(path)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n")
    return side


def run_config(cfg: RunConfig, scenario: int | None = None) -> SweepResult:
    workers = cfg["run.workers"] or default_workers()
    return run_scenario(scenario_config(cfg, scenario), cfg["run.n_trials"], cfg["run.seed"], workers)


def figure_command(fig_id: int, cfg: RunConfig) -> SweepResult:
    """Default sweep behind figure 2, 3 or 5."""
    if fig_id not in FIGURE_SCENARIO:
        raise ConfigError(f"figure must be one of {sorted(FIGURE_SCENARIO)}, got {fig_id}")
    # recorded in the sidecar so that a replay runs the same scenario
    cfg.values["run"]["scenario"] = FIGURE_SCENARIO[fig_id]
    return run_config(cfg)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file or a results .meta.json sidecar")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one parameter (repeatable)")
    common.add_argument("--trials", type=int, help="shortcut for run.n_trials")
    common.add_argument("--seed", type=int, help="shortcut for run.seed")
    common.add_argument("--workers", type=int, help="shortcut for run.workers")
    common.add_argument("--charge-time", type=float, help="shortcut for stations.charge_time_s")
    common.add_argument("--output", "-o", default="results.csv", help="results CSV path")
    common.add_argument("--quiet", "-q", action="store_true", help="do not echo the resolved config")

    parser = argparse.ArgumentParser(prog="ruralcov", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run the scenario selected by run.scenario")
    run.add_argument("--scenario", type=int, choices=(1, 2, 3))
    fig = sub.add_parser("figure", parents=[common], help="regenerate a figure's sweep as CSV")
    fig.add_argument("fig_id", type=int, choices=sorted(FIGURE_SCENARIO))
    sub.add_parser("config", parents=[common], help="print the resolved configuration")
    return parser


def _overrides(args) -> dict:
    out = dict(parse_override(s) for s in args.set)
    shortcuts = {"run.n_trials": args.trials, "run.seed": args.seed, "run.workers": args.workers,
                 "stations.charge_time_s": args.charge_time, "run.scenario": getattr(args, "scenario", None)}
    out.update({k: v for k, v in shortcuts.items() if v is not None})
    return out


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if args.command == "config":
        sys.stdout.write(cfg.to_toml())
        return 0
    if not args.quiet:
        sys.stderr.write("# resolved configuration\n" + cfg.to_toml())
    try:
        if args.command == "figure":
            result = figure_command(args.fig_id, cfg)
        else:
            result = run_config(cfg)
        side = emit_results(result, args.output, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - exit code contract
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"wrote {args.output} and {side}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
