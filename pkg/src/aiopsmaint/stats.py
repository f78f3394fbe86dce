"""Evaluation and hypothesis-testing mathematics.

Everything here is a pure function of its inputs. Metrics take plain
sequences or numpy arrays; tests return :class:`TestResult`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps
from scipy.special import ndtr

#: Romano et al. magnitude cut points for |Cliff's delta|.
CLIFF_THRESHOLDS = (0.147, 0.33, 0.474)

#: On-demand hourly price (USD) of the reference cloud instance.
DEFAULT_HOURLY_RATE = 0.504

#: Exact Mann-Whitney enumeration is used up to this many (a, b) pairs.
EXACT_MWU_MAX_PAIRS = 400


class StatsError(ValueError):
    pass


class SingleClass(StatsError):
    """Raised when a metric needs both classes and only one is present."""


class ZeroVariance(StatsError):
    pass


class ZeroMean(StatsError):
    pass


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    degenerate: bool = False

    __test__ = False  # keep pytest from collecting this class


class Magnitude(str, Enum):
    NEGLIGIBLE = "negligible"
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


@dataclass(frozen=True)
class EffectSize:
    delta: float
    magnitude: Magnitude
    log_odds_ratio: float


@dataclass(frozen=True)
class RankedGroups:
    """Scott-Knott output. ``clusters[0]`` holds the rank-1 treatments."""

    clusters: tuple[tuple[str, ...], ...]
    means: Mapping[str, float]

    def rank_of(self, name: str) -> int:
        for rank, cluster in enumerate(self.clusters, start=1):
            if name in cluster:
                return rank
        raise KeyError(name)

    def as_rows(self) -> list[tuple[str, int, float]]:
        return [(name, rank, self.means[name])
                for rank, cluster in enumerate(self.clusters, start=1)
                for name in cluster]


# ---------------------------------------------------------------------------
# classification metrics

def _binary(labels) -> np.ndarray:
    y = np.asarray(labels)
    if y.size and not np.isin(y, (0, 1)).all():
        raise StatsError("labels must be 0/1")
    return y.astype(np.int8)


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum identity.

    Ties between a positive and a negative count one half.
    """
    s = np.asarray(scores, dtype=float)
    y = _binary(labels)
    if s.shape != y.shape:
        raise StatsError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs at least one positive and one negative")
    ranks = sps.rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def confusion(scores, labels, threshold: float = 0.5) -> tuple[int, int, int, int]:
    """Return ``(tp, fp, fn, tn)`` with positive prediction iff score > threshold."""
    s = np.asarray(scores, dtype=float)
    y = _binary(labels).astype(bool)
    pred = s > threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    return tp, fp, fn, tn


def f1_mcc(scores, labels, threshold: float = 0.5) -> tuple[float, float]:
    if len(scores) == 0:
        raise StatsError("f1_mcc needs at least one sample")
    tp, fp, fn, tn = confusion(scores, labels, threshold)
    f1_den = 2 * tp + fp + fn
    f1 = 2 * tp / f1_den if f1_den else 0.0
    mcc_den = math.sqrt(float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    mcc = (tp * tn - fp * fn) / mcc_den if mcc_den else 0.0
    return f1, mcc


def error_rate(scores, labels, threshold: float = 0.5) -> float:
    tp, fp, fn, tn = confusion(scores, labels, threshold)
    n = tp + fp + fn + tn
    if n == 0:
        raise StatsError("error rate of an empty set")
    return (fp + fn) / n


def mse(scores, labels) -> float:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    return float(np.mean((y - s) ** 2))


# ---------------------------------------------------------------------------
# hypothesis tests and effect sizes

def two_proportion_z(x1: int, n1: int, x2: int, n2: int) -> TestResult:
    """Pooled two-proportion Z-test of ``x2/n2`` against ``x1/n1`` (two-sided).

    The statistic is positive when the second proportion is larger.
    """
    if n1 < 1 or n2 < 1:
        raise StatsError("both groups need at least one observation")
    if not (0 <= x1 <= n1 and 0 <= x2 <= n2):
        raise StatsError("counts must lie in [0, n]")
    p1 = x1 / n1
    p2 = x2 / n2
    pooled = (x1 + x2) / (n1 + n2)
    if pooled <= 0.0 or pooled >= 1.0:
        return TestResult(0.0, 1.0, "two-proportion z", degenerate=True)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    z = (p2 - p1) / se
    p = min(1.0, 2.0 * float(ndtr(-abs(z))))
    return TestResult(z, p, "two-proportion z")


def _mwu_null_counts(m: int, n: int) -> np.ndarray:
    """Number of orderings giving each U in 0..m*n (Gaussian binomial coefficients)."""
    size = m * n + 1
    poly = np.zeros(size, dtype=np.int64)
    poly[0] = 1
    for i in range(1, m + 1):
        # multiply by (1 - q^(n+i)) then divide by (1 - q^i)
        shift = n + i
        if shift < size:
            poly[shift:] -= poly[:-shift].copy()
        for k in range(i, size):
            poly[k] += poly[k - i]
    return poly


def mann_whitney_u(a, b, method: str = "auto") -> TestResult:
    """Two-sided Mann-Whitney U test; ``statistic`` is U for ``a``.

    ``method="auto"`` uses the exact null distribution for small tie-free
    samples (``m*n <= EXACT_MWU_MAX_PAIRS``) and otherwise the normal
    approximation with tie and continuity corrections. ``"exact"`` and
    ``"normal"`` force one path; ``"exact"`` rejects tied samples.
    """
    if method not in ("auto", "exact", "normal"):
        raise StatsError(f"unknown method {method!r}")
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    m, n = xa.size, xb.size
    if m == 0 or n == 0:
        raise StatsError("both samples must be non-empty")
    pooled = np.concatenate([xa, xb])
    ranks = sps.rankdata(pooled)
    u_a = float(ranks[:m].sum() - m * (m + 1) / 2.0)
    _, tie_counts = np.unique(pooled, return_counts=True)
    has_ties = bool((tie_counts > 1).any())

    if method == "exact" and has_ties:
        raise StatsError("exact Mann-Whitney null assumes no ties")
    if method == "exact" and math.comb(m + n, m) >= 2**62:
        raise StatsError("samples too large for the exact null (integer overflow)")
    use_exact = method == "exact" or (method == "auto" and m * n <= EXACT_MWU_MAX_PAIRS
                                      and not has_ties)
    if use_exact:
        counts = _mwu_null_counts(m, n)
        total = counts.sum()
        k = int(round(u_a))
        lower = counts[: k + 1].sum() / total
        upper = counts[k:].sum() / total
        p = min(1.0, 2.0 * min(lower, upper))
        return TestResult(u_a, float(p), "mann-whitney exact")

    big_n = m + n
    tie_term = float(np.sum(tie_counts.astype(float) ** 3 - tie_counts))
    var = m * n / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if var <= 0.0:
        return TestResult(u_a, 1.0, "mann-whitney normal", degenerate=True)
    z = max(0.0, abs(u_a - m * n / 2.0) - 0.5) / math.sqrt(var)
    p = min(1.0, 2.0 * float(ndtr(-z)))
    return TestResult(u_a, p, "mann-whitney normal")


def magnitude(delta: float) -> Magnitude:
    d = abs(delta)
    small, medium, large = CLIFF_THRESHOLDS
    if d < small:
        return Magnitude.NEGLIGIBLE
    if d < medium:
        return Magnitude.SMALL
    if d < large:
        return Magnitude.MEDIUM
    return Magnitude.LARGE


def cliffs_delta_from_rates(x1: int, n1: int, x2: int, n2: int) -> EffectSize:
    """Cliff's delta for a change in event rate from group 1 to group 2.

    Log odds ratio -> Cohen's d (times sqrt(3)/pi) -> delta = 2*Phi(d/sqrt(2)) - 1.
    A +0.5 correction is applied to every cell when any cell is zero.
    """
    cells = [float(x1), float(n1 - x1), float(x2), float(n2 - x2)]
    if min(cells) < 0:
        raise StatsError("counts must lie in [0, n]")
    if min(cells) == 0.0:
        cells = [c + 0.5 for c in cells]
    a, b, c, d = cells
    lor = math.log((c / d) / (a / b))
    cohen_d = lor * math.sqrt(3.0) / math.pi
    delta = 2.0 * float(ndtr(cohen_d / math.sqrt(2.0))) - 1.0
    return EffectSize(delta, magnitude(delta), lor)


# ---------------------------------------------------------------------------
# Scott-Knott

def _b0(sorted_means: np.ndarray, cut: int) -> float:
    left, right = sorted_means[:cut], sorted_means[cut:]
    total = sorted_means.sum()
    k = sorted_means.size
    return float(left.sum() ** 2 / left.size + right.sum() ** 2 / right.size - total ** 2 / k)


def best_split(sorted_means: Sequence[float]) -> tuple[int, float]:
    """Cut index (size of the left part) maximising the between-group sum of squares."""
    m = np.asarray(sorted_means, dtype=float)
    best_cut, best = 1, -math.inf
    for cut in range(1, m.size):
        b = _b0(m, cut)
        if b > best:
            best_cut, best = cut, b
    return best_cut, best


def scott_knott(groups: Mapping[str, Sequence[float]], alpha: float = 0.05,
                higher_is_better: bool = True) -> RankedGroups:
    """Rank treatments into statistically distinct clusters of means.

    Uses the classical lambda statistic against a chi-square with
    ``k/(pi-2)`` degrees of freedom; the error variance is pooled over
    every treatment.
    """
    if not groups:
        raise StatsError("scott_knott needs at least one group")
    for name, values in groups.items():
        if len(values) < 2:
            raise StatsError(f"group {name!r} needs at least two measurements")

    names = list(groups)
    means = {k: float(np.mean(groups[k])) for k in names}
    order = sorted(names, key=lambda k: (-means[k] if higher_is_better else means[k], k))

    dof = sum(len(groups[k]) - 1 for k in names)
    pooled_var = sum(float(np.var(groups[k], ddof=1)) * (len(groups[k]) - 1) for k in names) / dof
    harmonic_n = len(names) / sum(1.0 / len(groups[k]) for k in names)
    var_of_mean = pooled_var / harmonic_n

    def split(block: list[str]) -> list[list[str]]:
        k = len(block)
        if k < 2:
            return [block]
        m = np.array([means[name] for name in block])
        cut, b0 = best_split(m)
        if b0 <= 0.0:
            return [block]
        sigma2 = (float(np.sum((m - m.mean()) ** 2)) + dof * var_of_mean) / (k + dof)
        if sigma2 <= 0.0:
            return [block]
        lam = math.pi / (2.0 * (math.pi - 2.0)) * b0 / sigma2
        critical = sps.chi2.ppf(1.0 - alpha, k / (math.pi - 2.0))
        if lam <= critical:
            return [block]
        return split(block[:cut]) + split(block[cut:])

    clusters = tuple(tuple(c) for c in split(order))
    return RankedGroups(clusters, means)


# ---------------------------------------------------------------------------
# seasonality, cost-effectiveness, stability, money

def autocorrelation(series, max_lag: int) -> list[tuple[int, float, float]]:
    """Sample autocorrelation for lags 0..max_lag with the 1.96/sqrt(n) band."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if max_lag < 1 or n <= max_lag + 1:
        raise StatsError("series must be longer than max_lag + 1")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom <= 0.0:
        raise ZeroVariance("autocorrelation of a constant series")
    bound = 1.96 / math.sqrt(n)
    out = [(0, 1.0, bound)]
    for lag in range(1, max_lag + 1):
        out.append((lag, float(np.dot(d[:-lag], d[lag:]) / denom), bound))
    return out


@dataclass(frozen=True)
class ECRatio:
    value: float
    improvement_pct: float
    frequency_pct: float
    no_retrains: bool


def ec_ratio(auc_approach: float, auc_stationary: float, retrains: float,
             opportunities: int) -> ECRatio:
    """Effectiveness per unit of cost: improvement% over retrain-frequency%."""
    if opportunities < 1:
        raise StatsError("need at least one retraining opportunity")
    if auc_stationary <= 0:
        raise StatsError("stationary AUC must be positive")
    improvement = 100.0 * (auc_approach - auc_stationary) / auc_stationary
    frequency = 100.0 * retrains / opportunities
    if retrains == 0:
        return ECRatio(0.0, improvement, 0.0, True)
    return ECRatio(improvement / frequency, improvement, frequency, False)


def cv(values) -> float:
    """Coefficient of variation with the sample (n-1) standard deviation."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise StatsError("cv needs at least two values")
    mu = float(x.mean())
    if mu == 0.0:
        raise ZeroMean("cv undefined for zero mean")
    return float(x.std(ddof=1)) / mu


def dollar_cost(seconds: float, hourly_rate: float = DEFAULT_HOURLY_RATE) -> float:
    if seconds < 0 or hourly_rate < 0:
        raise StatsError("seconds and hourly_rate must be non-negative")
    return seconds / 3600.0 * hourly_rate
