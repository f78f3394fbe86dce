"""Tables behind the ``analyze``, ``run``, ``rank`` and ``report`` commands.

Every table is a header plus a list of rows; :func:`write_csv` renders
floats with ``repr`` so that re-parsing a CSV gives back the same values.
"""
from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import stats
from .archive import ResultArchive
from .data import PeriodizedDataset
from .engine import RunResult

log = logging.getLogger(__name__)

SIGNIFICANCE = 0.05
UP, FLAT, DOWN = "↑", "−", "↓"


class ReportError(ValueError):
    pass


class InsufficientRepetitions(ReportError):
    pass


class MissingBaseline(ReportError):
    pass


@dataclass
class Table:
    header: list[str]
    rows: list[list]

    def column(self, name: str) -> list:
        j = self.header.index(name)
        return [r[j] for r in self.rows]


# ---------------------------------------------------------------------------
# CSV / text rendering

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(table: Table, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path: str | Path) -> Table:
    """Inverse of :func:`write_csv`: numbers come back as int/float, blanks as None."""
    def parse(s: str):
        if s == "":
            return None
        if s in ("true", "false"):
            return s == "true"
        try:
            return int(s)
        except ValueError:
            pass
        try:
            return float(s)
        except ValueError:
            return s

    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return Table(rows[0], [[parse(c) for c in r] for r in rows[1:]])


def format_table(table: Table, digits: int = 4) -> str:
    def fmt(v):
        if isinstance(v, (float, np.floating)) and not isinstance(v, bool):
            if math.isnan(v):
                return ""
            if v != 0 and abs(v) < 10 ** -digits:
                return f"{v:.{digits - 1}e}"
            return f"{v:.{digits}f}"
        return _cell(v)

    cells = [table.header] + [[fmt(v) for v in r] for r in table.rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(table.header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# dataset analysis

def period_stats(data: PeriodizedDataset) -> Table:
    rows = [[p.index, p.start, p.end, p.n_samples, p.n_positive,
             p.positive_rate if p.n_samples else None] for p in data.periods]
    return Table(["period", "start", "end", "n_samples", "n_positive", "positive_rate"], rows)


def rate_matrices(data: PeriodizedDataset) -> tuple[Table, Table, Table]:
    """Pairwise Z-test p-values, Cliff's deltas and their magnitudes between periods.

    Cells involving an empty period are left blank.
    """
    periods = data.periods
    n = len(periods)
    header = ["period"] + [str(p.index) for p in periods]
    pv = [[p.index] + [None] * n for p in periods]
    dl = [[p.index] + [None] * n for p in periods]
    mg = [[p.index] + [None] * n for p in periods]
    for a, pa in enumerate(periods):
        for b, pb in enumerate(periods):
            if not pa.n_samples or not pb.n_samples:
                continue
            pv[a][b + 1] = stats.two_proportion_z(pa.n_positive, pa.n_samples,
                                                  pb.n_positive, pb.n_samples).p_value
            eff = stats.cliffs_delta_from_rates(pa.n_positive, pa.n_samples,
                                                pb.n_positive, pb.n_samples)
            dl[a][b + 1] = eff.delta
            mg[a][b + 1] = eff.magnitude.value
    return Table(header, pv), Table(header, dl), Table(header, mg)


def feature_shift_counts(data: PeriodizedDataset, alpha: float = SIGNIFICANCE) -> Table:
    """Per feature, how many period pairs differ under a Mann-Whitney U test."""
    nonempty = [p for p in data.periods if p.n_samples]
    pairs = list(itertools.combinations(nonempty, 2))
    rows = []
    for j, name in enumerate(data.feature_names):
        hits = sum(stats.mann_whitney_u(pa.X[:, j], pb.X[:, j]).p_value < alpha
                   for pa, pb in pairs)
        rows.append([name, hits, len(pairs)])
    return Table(["feature", "significant_pairs", "total_pairs"], rows)


def default_max_lag(n_periods: int) -> int:
    return max(1, min(12, n_periods - 2))


def seasonality(data: PeriodizedDataset, max_lag: int | None = None) -> Table:
    """Autocorrelation of the per-period sample count and positive rate.

    Empty periods contribute a rate of 0. A constant series yields no rows.
    """
    counts = [p.n_samples for p in data.periods]
    rates = [p.positive_rate if p.n_samples else 0.0 for p in data.periods]
    lag = default_max_lag(len(counts)) if max_lag is None else max_lag
    rows = []
    for name, series in (("n_samples", counts), ("positive_rate", rates)):
        try:
            acf = stats.autocorrelation(series, lag)
        except stats.StatsError as exc:
            log.warning("autocorrelation of %s skipped: %s", name, exc)
            continue
        for k, r, bound in acf:
            rows.append([name, k, r, bound, k > 0 and abs(r) > bound])
    return Table(["series", "lag", "coefficient", "bound", "significant"], rows)


# ---------------------------------------------------------------------------
# run summaries

def _mean(values: Iterable[float | None]) -> float | None:
    v = [x for x in values if x is not None]
    return float(np.mean(v)) if v else None


def run_summary(archive: ResultArchive, hourly_rate: float) -> Table:
    rows = []
    for name, runs in archive.results.items():
        ok = archive.successful(name)
        train = _mean(r.total_train_time_s for r in ok)
        test = _mean(r.total_test_time_s for r in ok)
        rows.append([
            name, len(runs), len(runs) - len(ok),
            _mean(r.overall_auc for r in ok),
            _mean(r.retrain_count for r in ok),
            train, test,
            None if train is None else stats.dollar_cost(train, hourly_rate),
            None if test is None else stats.dollar_cost(test, hourly_rate),
        ])
    return Table(["policy", "runs", "failures", "overall_auc", "retrains",
                  "train_s", "test_s", "train_usd", "test_usd"], rows)


# ---------------------------------------------------------------------------
# ranking

LOWER_IS_BETTER = {"cv", "time"}
RANK_METRICS = ("auc", "f1", "mcc", "cv", "ec", "time")


def merge_results(archives: Sequence[ResultArchive]) -> dict[str, list[RunResult]]:
    merged: dict[str, list[RunResult]] = {}
    for arc in archives:
        for name in arc.results:
            merged.setdefault(name, []).extend(arc.successful(name))
    return merged


def _run_cv(run: RunResult) -> float | None:
    aucs = run.period_aucs
    if len(aucs) < 2:
        return None
    try:
        return stats.cv(aucs)
    except stats.StatsError:
        return None


def metric_values(results: dict[str, list[RunResult]], metric: str,
                  baseline: str | None = None) -> dict[str, list[float]]:
    """Per-repetition measurement lists keyed by policy.

    ``ec`` pairs repetition r of a policy with repetition r of ``baseline``
    and leaves the baseline itself out.
    """
    if metric not in RANK_METRICS:
        raise ReportError(f"unknown metric {metric!r}")
    out: dict[str, list[float]] = {}
    if metric == "ec":
        if baseline not in results:
            raise MissingBaseline(f"baseline policy {baseline!r} not in the archives")
        base = results[baseline]
        for name, runs in results.items():
            if name == baseline:
                continue
            vals = []
            for run, ref in zip(runs, base):
                if run.overall_auc is None or not ref.overall_auc or not run.opportunities:
                    continue
                vals.append(stats.ec_ratio(run.overall_auc, ref.overall_auc,
                                           run.retrain_count, run.opportunities).value)
            out[name] = vals
        return out
    for name, runs in results.items():
        if metric == "cv":
            vals = [_run_cv(r) for r in runs]
        elif metric == "time":
            vals = [r.total_train_time_s + r.total_test_time_s for r in runs]
        else:
            vals = [getattr(r, f"overall_{metric}") for r in runs]
        out[name] = [float(v) for v in vals if v is not None]
    return out


def rank_table(values: dict[str, list[float]], metric: str,
               alpha: float = SIGNIFICANCE) -> tuple[stats.RankedGroups, Table]:
    short = {k: len(v) for k, v in values.items() if len(v) < 2}
    if short:
        raise InsufficientRepetitions(f"need at least 2 repetitions per policy, got {short}")
    ranked = stats.scott_knott(values, alpha, higher_is_better=metric not in LOWER_IS_BETTER)
    rows = [[rank, name, mean, float(np.std(values[name], ddof=1)), len(values[name])]
            for name, rank, mean in ranked.as_rows()]
    return ranked, Table(["rank", "policy", "mean", "sd", "n"], rows)


# ---------------------------------------------------------------------------
# maintenance report

def policy_report(archive: ResultArchive, baseline: str | None,
                  hourly_rate: float) -> Table:
    """One row per policy; improvement and EC are blank without the baseline."""
    base_auc = None
    if baseline is not None and baseline in archive.results:
        base_auc = _mean(r.overall_auc for r in archive.successful(baseline))
    rows = []
    for name in archive.results:
        runs = archive.successful(name)
        kind = runs[0].policy.get("kind") if runs else None
        auc = _mean(r.overall_auc for r in runs)
        retrains = _mean(sum(rec.retrained for rec in r.records) for r in runs)
        opportunities = max((len(r.records) for r in runs), default=0)
        improvement = ec = None
        ec_flag = False
        if base_auc and auc is not None and opportunities:
            e = stats.ec_ratio(auc, base_auc, retrains, opportunities)
            improvement, ec, ec_flag = e.improvement_pct, e.value, e.no_retrains
        train = _mean(r.total_train_time_s for r in runs)
        test = _mean(r.total_test_time_s for r in runs)
        rows.append([
            name, kind, len(runs), auc, improvement, retrains, opportunities, ec,
            ec_flag, _mean(_run_cv(r) for r in runs), train, test,
            None if train is None else stats.dollar_cost(train, hourly_rate),
            None if test is None else stats.dollar_cost(test, hourly_rate),
        ])
    return Table(["policy", "kind", "runs", "overall_auc", "improvement_pct", "retrains",
                  "opportunities", "ec", "ec_no_retrains", "cv", "train_s", "test_s", "train_usd", "test_usd"], rows)


def update_effect(post: Sequence[float], pre: Sequence[float],
                  alpha: float = SIGNIFICANCE) -> tuple[str, float]:
    """``↑``/``↓`` when the post-update AUCs differ significantly from the pre-update ones."""
    test = stats.mann_whitney_u(post, pre)
    if test.p_value <= alpha:
        if np.median(post) > np.median(pre):
            return UP, test.p_value
        if np.median(post) < np.median(pre):
            return DOWN, test.p_value
    return FLAT, test.p_value


def period_matrix(archive: ResultArchive, alpha: float = SIGNIFICANCE) -> Table:
    """Per policy and evaluation period: retrain frequency and the effect of updating.

    Without an update (or for ensembles and online learners, which keep no
    counterfactual) the pre-update AUC equals the post-update AUC.
    """
    rows = []
    for name in archive.results:
        runs = archive.successful(name)
        if not runs:
            continue
        periods = [rec.period_index for rec in runs[0].records]
        for j, period in enumerate(periods):
            recs = [r.records[j] for r in runs if j < len(r.records)]
            fraction = float(np.mean([rec.retrained for rec in recs]))
            pairs = [(rec.auc, rec.auc_without_update if rec.retrained
                      and rec.auc_without_update is not None else rec.auc)
                     for rec in recs if rec.auc is not None]
            symbol, p = FLAT, None
            if pairs:
                post, pre = zip(*pairs)
                symbol, p = update_effect(post, pre, alpha)
            rows.append([name, period, fraction, fraction > 0.5, symbol, p])
    return Table(["policy", "period", "retrain_fraction", "retrained", "effect", "p_value"],
                 rows)


def period_grid(matrix: Table) -> str:
    """Compact view: ``*`` marks a majority retrain, followed by the effect symbol."""
    policies = list(dict.fromkeys(matrix.column("policy")))
    periods = sorted(set(matrix.column("period")))
    cell = {(r[0], r[1]): ("*" if r[3] else "") + r[4] for r in matrix.rows}
    grid = Table(["policy"] + [str(p) for p in periods],
                 [[name] + [cell.get((name, p), "") for p in periods] for name in policies])
    return format_table(grid)
