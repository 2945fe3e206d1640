"""
Module/Script Name: cli.py
Path: fedpoison/cli.py

Description:
Command line front end.

Subcommands:
- run:   one experiment, per-round CSV, optional final parameter dump
- sweep: attack x defense x seed matrix, per-run CSVs, summary CSV and
         manifest.json
- plot:  PNG chart of test AUC per round from one or more run CSVs

Exit status is 0 on success, 2 for configuration problems and 1 for any
other failure.

Author(s):
fedpoison maintainers

Created Date:
2026-10-19

Last Modified Date:
2026-10-19

Version:
v1.0.0

Comments:
- v1.0.0: Initial implementation
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import Future, ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

from loguru import logger

from . import __version__
from .config_schema import ATTACK_KINDS, DEFENSE_KINDS, ExperimentConfig
from .config_store import (
    apply_overrides,
    config_hash,
    dump_config,
    parse_config,
    validate_config,
)
from .errors import ConfigError, FedPoisonError
from .federation import FederatedSimulation, RoundRecord
from .nn_core import dump_param_vector
from .reporting import (
    RunCsvWriter,
    RunManifest,
    SummaryCell,
    render_auc_chart,
    run_csv_name,
    write_summary_csv,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

LOG_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{line} - {message}"
)

# (attack, defense, seed, csv path, final auc, error message)
SweepResult = Tuple[str, str, int, Optional[str], Optional[float], Optional[str]]


def configure_logging(level: str = "INFO") -> None:
    """Replace loguru's default sink with a single stderr sink at `level`."""
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)


def _log_progress(percent: int, message: str) -> None:
    logger.info(f"[{percent:3d}%] {message}")


def execute_run(
    cfg: ExperimentConfig, out_dir: str, dump_params: bool = False
) -> Tuple[str, List[RoundRecord]]:
    """
    Run one experiment, streaming rows to `<out_dir>/run_<hash>_<seed>.csv`.

    The fully resolved config is written beside it as
    `config_<hash>_<seed>.conf`; passing that file back to `run` reproduces
    the CSV byte for byte.

    Returns:
        (csv path, round records)
    """
    digest = config_hash(cfg)
    csv_path = os.path.join(out_dir, run_csv_name(digest, cfg.seed))
    dump_config(cfg, os.path.join(out_dir, f"config_{digest}_{cfg.seed}.conf"))
    simulation = FederatedSimulation(cfg)
    with RunCsvWriter(csv_path) as writer:
        records = simulation.run(sink=writer.write, progress_callback=_log_progress)
    if dump_params:
        params_path = os.path.join(out_dir, f"params_{digest}_{cfg.seed}.txt")
        dump_param_vector(simulation.global_params, params_path)
        logger.info(f"final parameters written to {params_path}")
    return csv_path, records


def cmd_run(
    config_path: str, seed: Optional[int], out_dir: str, dump_params: bool = False
) -> int:
    """Run a single experiment; prints the final AUC on success."""
    try:
        cfg = parse_config(config_path)
        if seed is not None:
            cfg = apply_overrides(cfg, {"seed": seed}, source="--seed")
        csv_path, records = execute_run(cfg, out_dir, dump_params)
    except ConfigError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FedPoisonError, OSError) as e:
        logger.error(f"run aborted: {e}")
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_FAILURE

    print(f"[SUCCESS] final_auc={records[-1].test_auc:.6f} rounds={len(records)} csv={csv_path}")
    return EXIT_OK


def _sweep_job(
    base: Dict[str, Any], attack: str, defense: str, seed: int, out_dir: str, log_level: str
) -> SweepResult:
    """One cell of the sweep matrix; failures are returned, not raised."""
    if log_level:
        configure_logging(log_level)
    try:
        source = f"{attack}/{defense}/seed {seed}"
        cfg = apply_overrides(
            validate_config(base, source),
            {"attack.kind": attack, "defense.kind": defense, "seed": seed},
            source,
        )
        csv_path, records = execute_run(cfg, out_dir)
    except Exception as e:  # noqa: BLE001 - every failure becomes an `error` cell
        logger.error(f"sweep run {attack}/{defense}/seed {seed} failed: {e}")
        return attack, defense, seed, None, None, str(e)
    return attack, defense, seed, csv_path, records[-1].test_auc, None


def _collect(future: Future, attack: str, defense: str, seed: int) -> SweepResult:
    """Result of a pooled sweep job; a worker that died (BrokenProcessPool) is an error cell."""
    try:
        return future.result()
    except Exception as e:  # noqa: BLE001 - every failure becomes an `error` cell
        reason = f"{type(e).__name__}: {e}"
        logger.error(f"sweep run {attack}/{defense}/seed {seed} lost its worker: {reason}")
        return attack, defense, seed, None, None, reason


def cmd_sweep(
    config_path: str,
    attacks: Sequence[str],
    defenses: Sequence[str],
    seeds: Sequence[int],
    out_dir: str,
    jobs: int = 1,
    log_level: str = "",
) -> int:
    """
    Run every (attack, defense, seed) combination and summarise final AUCs.

    Writes one run CSV per combination, `summary.csv` with one row per
    (attack, defense) and `manifest.json`. Failed runs show as `error` in
    the summary and do not stop the sweep.
    """
    try:
        base_cfg = parse_config(config_path)
    except ConfigError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_CONFIG

    base = base_cfg.to_dict()
    matrix = [(a, d, s) for a in attacks for d in defenses for s in seeds]
    logger.info(
        f"sweep: {len(matrix)} runs "
        f"({len(attacks)} attacks x {len(defenses)} defenses x {len(seeds)} seeds)"
    )

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_sweep_job, base, a, d, s, out_dir, log_level) for a, d, s in matrix
            ]
            results = [_collect(future, *job) for future, job in zip(futures, matrix)]
    else:
        results = [_sweep_job(base, a, d, s, out_dir, "") for a, d, s in matrix]

    cells: Dict[Tuple[str, str], SummaryCell] = {
        (a, d): SummaryCell(a, d, list(seeds)) for a in attacks for d in defenses
    }
    manifest = RunManifest(config_hash=config_hash(base_cfg), seeds=list(seeds), out_dir=out_dir)
    for attack, defense, seed, csv_path, auc, error in results:
        cell = cells[(attack, defense)]
        if error is not None:
            cell.failed_seeds.append(seed)
            manifest.failures[f"{attack}/{defense}/{seed}"] = error
            continue
        assert csv_path is not None and auc is not None
        cell.final_aucs.append(auc)
        manifest.run_csvs.append(csv_path)

    summary_path = os.path.join(out_dir, "summary.csv")
    write_summary_csv(list(cells.values()), summary_path)
    manifest.summary_csv = summary_path
    manifest_path = manifest.save()

    failed = len(manifest.failures)
    tag = "[WARNING]" if failed else "[SUCCESS]"
    print(
        f"{tag} sweep finished: {len(matrix) - failed}/{len(matrix)} runs ok, "
        f"summary={summary_path} manifest={manifest_path}"
    )
    return EXIT_OK


def cmd_plot(csv_paths: Sequence[str], out_path: str) -> int:
    try:
        path = render_auc_chart(csv_paths, out_path)
    except (OSError, ValueError) as e:
        print(f"[ERROR] cannot plot: {e}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"[SUCCESS] chart written to {path}")
    return EXIT_OK


def _csv_list(choices: Sequence[str]):
    def parse(text: str) -> List[str]:
        items = [item.strip() for item in text.split(",") if item.strip()]
        unknown = [item for item in items if item not in choices]
        if not items or unknown:
            raise argparse.ArgumentTypeError(
                f"expected a comma separated subset of {', '.join(choices)}; got '{text}'"
            )
        return items

    return parse


def _seed_list(text: str) -> List[int]:
    try:
        seeds = [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"seeds must be integers: {e}") from e
    if not seeds or any(seed < 0 for seed in seeds):
        raise argparse.ArgumentTypeError(f"expected non-negative integer seeds, got '{text}'")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedpoison",
        description="Federated learning poisoning attack and defense simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["TRACE", "DEBUG", "INFO", "WARNING", "ERROR"],
        help="stderr log level (default: INFO)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", required=True, help="experiment config file")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument(
        "--dump-params", action="store_true", help="also write the final parameter vector"
    )

    sweep = sub.add_parser("sweep", help="run an attack x defense x seed matrix")
    sweep.add_argument("--config", required=True, help="base experiment config file")
    sweep.add_argument("--attacks", required=True, type=_csv_list(ATTACK_KINDS))
    sweep.add_argument("--defenses", required=True, type=_csv_list(DEFENSE_KINDS))
    sweep.add_argument("--seeds", required=True, type=_seed_list)
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    plot = sub.add_parser("plot", help="chart test AUC per round from run CSVs")
    plot.add_argument("--csv", required=True, nargs="+", help="run CSV files")
    plot.add_argument("--out", required=True, help="output PNG path")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    if args.command == "run":
        return cmd_run(args.config, args.seed, args.out, args.dump_params)
    if args.command == "sweep":
        if args.jobs < 1:
            print("[ERROR] --jobs must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        return cmd_sweep(
            args.config,
            args.attacks,
            args.defenses,
            args.seeds,
            args.out,
            jobs=args.jobs,
            log_level=args.log_level,
        )
    return cmd_plot(args.csv, args.out)
