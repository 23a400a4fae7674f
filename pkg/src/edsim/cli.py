"""Command-line interface: single runs, the 4x60 experiment grid, and analysis."""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from . import __version__
from .analysis import MetricUnknown, MissingFile, compare_experiments, comparisons_csv, metric_names, render_report
from .domain import (
    ConfigError,
    Policy,
    Scenario,
    SimConfig,
    config_echo,
    load_config,
    parse_config_file,
    validate_config,
)
from .engine import make_run_record, render_trace, run_shift
from .metrics import RunRecord, SchemaError, write_csvs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_RUN_FAILED = 4
EXIT_SCHEMA = 5

COMBOS = {
    "baseline-ca": (Scenario.BASELINE, Policy.CA_TRUST),
    "baseline-fifo": (Scenario.BASELINE, Policy.FIFO),
    "replacement-ca": (Scenario.REPLACEMENT, Policy.CA_TRUST),
    "training-ca": (Scenario.TRAINING, Policy.CA_TRUST),
}


def _default_out_root() -> str:
    return os.environ.get("EDSIM_OUT", "out")


def _runs_line(record: RunRecord) -> str:
    m = record.metrics
    return (
        f"{record.run_id},{record.seed},{record.scenario},{record.policy},"
        f"{record.shift_length:.6f},{m.patients_served},{m.time_damage:.6f},{m.delay:.6f}"
    )


def _manifest(name: str, seeds: list[int], runs: int) -> str:
    lines = [
        f"tool = edsim {__version__}",
        f"experiment = {name}",
        f"runs = {runs}",
        f"seeds = {seeds[0]}..{seeds[-1]}" if seeds else "seeds = none",
    ]
    return "\n".join(lines) + "\n"


def _write_experiment_dir(out_dir: str, records: list[RunRecord], cfg: SimConfig, name: str, seeds: list[int]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_csvs(records, out_dir)
    with open(os.path.join(out_dir, "config.echo"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config_echo(cfg))
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_manifest(name, seeds, len(records)))


def _execute_run(args: tuple[SimConfig, str]) -> RunRecord:
    cfg, run_id = args
    return make_run_record(run_shift(cfg), run_id)


def cmd_run(config_path: str, seed: Optional[int], trace: bool, out: Optional[str]) -> int:
    try:
        overrides = {} if seed is None else {"seed": str(seed)}
        cfg = load_config(config_path, overrides)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if getattr(exc, "key", "") else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    out_dir = out or os.path.join(_default_out_root(), "run")
    result = run_shift(cfg)
    record = make_run_record(result, run_id=f"run-{cfg.seed:08d}")
    try:
        _write_experiment_dir(out_dir, [record], cfg, "run", [cfg.seed])
        if trace:
            with open(os.path.join(out_dir, "trace.csv"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(render_trace(result))
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    print(_runs_line(record))
    return EXIT_OK


def run_experiment(
    base_raw: dict,
    combo: str,
    runs: int,
    seed_base: int,
    out_dir: str,
    parallel: int = 1,
) -> list[RunRecord]:
    """Execute one scenario-policy combination for `runs` consecutive seeds."""
    scenario, policy = COMBOS[combo]
    seeds = [seed_base + i for i in range(runs)]
    jobs = []
    for s in seeds:
        raw = dict(base_raw)
        raw.update({"scenario": scenario.value, "policy": policy.value, "seed": str(s)})
        cfg = validate_config(raw)
        jobs.append((cfg, f"{combo}-{s:08d}"))

    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            records = list(pool.map(_execute_run, jobs))
    else:
        records = [_execute_run(job) for job in jobs]

    _write_experiment_dir(out_dir, records, jobs[0][0], combo, seeds)
    return records


def cmd_experiment(
    config_path: str,
    runs: int,
    seed_base: int,
    combo: str,
    out: Optional[str],
    parallel: int,
) -> int:
    if runs < 1:
        print("config error: --runs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        base_raw = parse_config_file(config_path) if config_path else {}
        # Validate the base config once up front so errors name their key.
        validate_config(base_raw)
    except ConfigError as exc:
        key = f" (key: {exc.key})" if getattr(exc, "key", "") else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    combos = list(COMBOS) if combo == "all" else [combo]
    out_root = out or os.path.join(_default_out_root(), "experiment")
    for name in combos:
        try:
            records = run_experiment(base_raw, name, runs, seed_base, os.path.join(out_root, name), parallel)
        except ConfigError as exc:
            key = f" (key: {exc.key})" if getattr(exc, "key", "") else ""
            print(f"config error{key}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except Exception as exc:  # noqa: BLE001 - a failed run aborts the combo
            print(f"combo {name} aborted: {exc}", file=sys.stderr)
            return EXIT_RUN_FAILED
        print(f"{name}: {len(records)} runs -> {os.path.join(out_root, name)}")
    return EXIT_OK


def cmd_analyze(
    dir_a: str,
    dir_b: str,
    metrics: str,
    mc_draws: int,
    mc_seed: int,
    out: Optional[str],
) -> int:
    wanted = None if metrics == "all" else [m.strip() for m in metrics.split(",") if m.strip()]
    try:
        rows = compare_experiments(dir_a, dir_b, wanted, mc_draws=mc_draws, mc_seed=mc_seed)
    except MissingFile as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemaError as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except MetricUnknown as exc:
        print(f"metric error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    report = render_report(rows)
    out_dir = out or os.path.join(_default_out_root(), "analysis")
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "comparisons.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(comparisons_csv(rows))
        with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report)
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    print(report, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"edsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one shift from a config file")
    p_run.add_argument("config", help="path to the key=value config file")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--trace", action="store_true", help="also write the event trace")
    p_run.add_argument("--out", default=None, help="output directory")

    p_exp = sub.add_parser("experiment", help="run seeded batches for scenario-policy combos")
    p_exp.add_argument("config", nargs="?", default="", help="optional base config file")
    p_exp.add_argument("--runs", type=int, default=60, help="runs per combo (default 60)")
    p_exp.add_argument("--seed-base", type=int, default=1, help="run i uses seed seed-base + i")
    p_exp.add_argument("--combo", default="all", choices=[*COMBOS, "all"], help="which combo to run")
    p_exp.add_argument("--out", default=None, help="output root (one directory per combo)")
    p_exp.add_argument("--parallel", type=int, default=1, help="process pool size")

    p_an = sub.add_parser("analyze", help="compare two experiment directories")
    p_an.add_argument("dir_a")
    p_an.add_argument("dir_b")
    p_an.add_argument("--metrics", default="all", help="comma-separated metric names or 'all'")
    p_an.add_argument("--mc-draws", type=int, default=10000, help="Monte Carlo draws for the chi-square test")
    p_an.add_argument("--mc-seed", type=int, default=0, help="seed for the Monte Carlo chi-square test")
    p_an.add_argument("--out", default=None, help="output directory for comparisons.csv and report.txt")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.seed, args.trace, args.out)
    if args.command == "experiment":
        return cmd_experiment(args.config, args.runs, args.seed_base, args.combo, args.out, args.parallel)
    if args.command == "analyze":
        return cmd_analyze(args.dir_a, args.dir_b, args.metrics, args.mc_draws, args.mc_seed, args.out)
    raise AssertionError(f"unhandled command {args.command!r}")  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
