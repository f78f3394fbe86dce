"""Command-line front end: ``analyze``, ``run``, ``rank`` and ``report``.

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 at least one failed run in the archive.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence, TextIO

from . import reports
from .archive import (
    ConfigError,
    ExperimentConfig,
    ResultArchive,
    environment_note,
    load_dataset,
    run_seed,
)
from .data import DataError, PeriodizedDataset
from .engine import EngineError, PolicyConfig, RunResult, run_policy
from .stats import DEFAULT_HOURLY_RATE

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUN_FAILURES = 0, 1, 2, 3
ARCHIVE_NAME = "archive.json"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# commands

def cmd_analyze(data: PeriodizedDataset, out_dir: str | Path, max_lag: int | None = None,
                svg: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    periods = reports.period_stats(data)
    pvalues, deltas, mags = reports.rate_matrices(data)
    acf = reports.seasonality(data, max_lag)
    tables = {
        "period_stats.csv": periods,
        "rate_pvalues.csv": pvalues,
        "rate_cliffs_delta.csv": deltas,
        "rate_magnitude.csv": mags,
        "feature_shifts.csv": reports.feature_shift_counts(data),
        "autocorrelation.csv": acf,
    }
    written = []
    for name, table in tables.items():
        reports.write_csv(table, out / name)
        written.append(out / name)
    if svg:
        from .plots import analysis_svgs
        written += analysis_svgs(periods, pvalues, acf, out)
    return written


_WORKER_DATA: PeriodizedDataset | None = None


def _init_worker(data: PeriodizedDataset) -> None:
    global _WORKER_DATA
    _WORKER_DATA = data


def _run_one(policy: PolicyConfig, seed: int, data: PeriodizedDataset | None = None) -> RunResult:
    data = _WORKER_DATA if data is None else data
    try:
        return run_policy(data, policy, seed)
    except Exception as exc:  # recorded in the archive, reported via exit code 3
        log.warning("policy %s seed %d failed: %s", policy.name, seed, exc)
        return RunResult(policy.to_dict(), seed, [], None, None, None, 0.0, 0.0,
                         error=f"{type(exc).__name__}: {exc}")


def cmd_run(config: ExperimentConfig, jobs: int = 1,
            data: PeriodizedDataset | None = None) -> ResultArchive:
    """Every policy x repetition; the archive keeps config order regardless of ``jobs``."""
    data = config.load_dataset() if data is None else data
    tasks = [(p, run_seed(config.base_seed, p.name, r))
             for p in config.policies for r in range(config.repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(data,)) as pool:
            futures = [pool.submit(_run_one, p, s) for p, s in tasks]
            runs = [f.result() for f in futures]
    else:
        runs = [_run_one(p, s, data) for p, s in tasks]
    results: dict[str, list[RunResult]] = {p.name: [] for p in config.policies}
    for (p, _), run in zip(tasks, runs):
        results[p.name].append(run)
    return ResultArchive(config.to_dict(), results, environment_note(),
                         data.fingerprint(), data.n_periods)


def cmd_rank(archives: Sequence[ResultArchive], metric: str = "auc",
             baseline: str | None = "stationary",
             alpha: float = reports.SIGNIFICANCE) -> tuple[object, reports.Table]:
    merged = reports.merge_results(archives)
    values = reports.metric_values(merged, metric, baseline)
    return reports.rank_table(values, metric, alpha)


def cmd_report(archive: ResultArchive, baseline: str | None, out_dir: str | Path,
               hourly_rate: float | None = None) -> tuple[reports.Table, reports.Table]:
    rate = archive.config.get("hourly_rate", DEFAULT_HOURLY_RATE) if hourly_rate is None \
        else hourly_rate
    if baseline not in archive.results:
        log.warning("baseline %r not in archive: improvement and EC columns left blank",
                    baseline)
    summary = reports.policy_report(archive, baseline, rate)
    matrix = reports.period_matrix(archive)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports.write_csv(summary, out / "report.csv")
    reports.write_csv(matrix, out / "period_effects.csv")
    (out / "report.txt").write_text(
        reports.format_table(summary) + "\n" + reports.period_grid(matrix), encoding="utf-8")
    return summary, matrix


# ---------------------------------------------------------------------------
# argument handling

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aiopsmaint",
                     description="Replay model-maintenance policies over time-ordered data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="per-period volume, rate and feature shift statistics")
    p.add_argument("--input", help="CSV file")
    p.add_argument("--schema", help="JSON schema file for --input")
    p.add_argument("--config", help="experiment config; its dataset section is analyzed")
    p.add_argument("--granularity", default="day", help="day|week|month|fixed:<n>")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--max-lag", type=int, default=None)
    p.add_argument("--svg", action="store_true", help="also write SVG charts")

    p = sub.add_parser("run", help="run every policy for every repetition")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, help="base seed (overrides base_seed)")
    p.add_argument("--hourly-rate", type=float, help="dollars per hour (overrides hourly_rate)")
    p.add_argument("--repetitions", type=int, help="overrides repetitions")

    p = sub.add_parser("rank", help="Scott-Knott ranking over one or more archives")
    p.add_argument("archives", nargs="+")
    p.add_argument("--metric", default="auc", choices=reports.RANK_METRICS)
    p.add_argument("--baseline", default="stationary", help="reference policy for --metric ec")
    p.add_argument("--alpha", type=float, default=reports.SIGNIFICANCE)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="per-policy summary and per-period update effects")
    p.add_argument("archive")
    p.add_argument("--baseline", default="stationary")
    p.add_argument("--hourly-rate", type=float)
    p.add_argument("--out", required=True)
    return parser


def _analyze(args, stream: TextIO) -> int:
    if args.config:
        if args.input:
            raise UsageError("give either --config or --input, not both")
        data = ExperimentConfig.load(args.config).load_dataset()
    else:
        if not (args.input and args.schema):
            raise UsageError("analyze needs --input and --schema (or --config)")
        data = load_dataset({"csv": {"path": args.input, "schema": args.schema,
                                     "granularity": args.granularity}})
    for path in cmd_analyze(data, args.out, args.max_lag, args.svg):
        print(path, file=stream)
    return EXIT_OK


def _run(args, stream: TextIO) -> int:
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    config = ExperimentConfig.load(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.hourly_rate is not None:
        overrides["hourly_rate"] = args.hourly_rate
    if args.repetitions is not None:
        overrides["repetitions"] = args.repetitions
    if args.out:
        overrides["output_dir"] = args.out
    if overrides:
        config = replace(config, **overrides)
    archive = cmd_run(config, args.jobs)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    archive.save(out / ARCHIVE_NAME)
    summary = reports.run_summary(archive, config.hourly_rate)
    reports.write_csv(summary, out / "summary.csv")
    stream.write(reports.format_table(summary))
    print(f"archive: {out / ARCHIVE_NAME}", file=stream)
    failures = archive.failures
    for name, seed, error in failures:
        print(f"FAILED {name} seed={seed}: {error}", file=sys.stderr)
    return EXIT_RUN_FAILURES if failures else EXIT_OK


def _rank(args, stream: TextIO) -> int:
    archives = [ResultArchive.load(p) for p in args.archives]
    _, table = cmd_rank(archives, args.metric, args.baseline, args.alpha)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports.write_csv(table, out / f"rank_{args.metric}.csv")
    text = reports.format_table(table)
    (out / f"rank_{args.metric}.txt").write_text(text, encoding="utf-8")
    stream.write(text)
    return EXIT_OK


def _report(args, stream: TextIO) -> int:
    archive = ResultArchive.load(args.archive)
    cmd_report(archive, args.baseline, args.out, args.hourly_rate)
    stream.write((Path(args.out) / "report.txt").read_text(encoding="utf-8"))
    return EXIT_OK


def main(argv: Sequence[str] | None = None, stream: TextIO | None = None) -> int:
    stream = sys.stdout if stream is None else stream
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"analyze": _analyze, "run": _run, "rank": _rank, "report": _report}[args.command]
    try:
        return handler(args, stream)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"aiopsmaint: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigError, EngineError, reports.ReportError, OSError,
            KeyError, ValueError) as exc:
        print(f"aiopsmaint: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
