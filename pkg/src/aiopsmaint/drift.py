"""Period-granularity concept-drift detectors: DDM, STEPD and PERM.

Each detector sees one observation per time period. DDM and STEPD consume
the incumbent model's error statistics on the newest period; PERM refits
the learner on ordered and permuted splits of two consecutive periods.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import stats

#: Significance level for STEPD's two-proportion test.
STEPD_ALPHA = 0.05


class InvalidErrorRate(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    drift: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"drift": self.drift, "diagnostics": dict(self.diagnostics)}

    @classmethod
    def from_dict(cls, d: dict) -> "Verdict":
        return cls(bool(d["drift"]), dict(d.get("diagnostics", {})))


# ---------------------------------------------------------------------------
# DDM

@dataclass(frozen=True)
class DdmState:
    p_min: float = math.inf
    s_min: float = math.inf
    initialized: bool = False


def ddm_observe(state: DdmState, error_rate: float, n: int) -> tuple[DdmState, Verdict]:
    """Feed one period's error rate. Registers reset after a drift verdict."""
    if not 0.0 <= error_rate <= 1.0:
        raise InvalidErrorRate(f"error rate {error_rate} outside [0, 1]")
    if n < 1:
        raise InvalidErrorRate("n must be positive")
    p = float(error_rate)
    s = math.sqrt(p * (1.0 - p) / n)
    diag = {"p": p, "s": s, "n": n}
    if not state.initialized:
        new = DdmState(p, s, True)
        return new, Verdict(False, {**diag, "p_min": p, "s_min": s, "initialized_now": True})
    diag.update(p_min=state.p_min, s_min=state.s_min,
                drift_level=state.p_min + 3.0 * state.s_min)
    # second clause only matters when s_min == 0 (an error-free baseline)
    if p + s >= state.p_min + 3.0 * state.s_min and p + s > state.p_min + state.s_min:
        return DdmState(), Verdict(True, diag)
    if p + s < state.p_min + state.s_min:
        state = DdmState(p, s, True)
    return state, Verdict(False, diag)


# ---------------------------------------------------------------------------
# STEPD

@dataclass(frozen=True)
class StepdState:
    n1: int = 0
    e1: int = 0

    @property
    def seeded(self) -> bool:
        return self.n1 > 0


def stepd_observe(state: StepdState, errors_new: int, n_new: int,
                  alpha: float = STEPD_ALPHA) -> tuple[StepdState, Verdict]:
    """Compare the newest period's error proportion with all earlier ones.

    Drift only on a significant *increase* in error; after drift the history
    restarts from the newest period.
    """
    if n_new < 1 or not 0 <= errors_new <= n_new:
        raise InvalidErrorRate("need 0 <= errors_new <= n_new and n_new >= 1")
    if not state.seeded:
        return StepdState(n_new, errors_new), Verdict(False, {"seeded_now": True,
                                                               "n2": n_new, "e2": errors_new})
    test = stats.two_proportion_z(state.e1, state.n1, errors_new, n_new)
    p1 = state.e1 / state.n1
    p2 = errors_new / n_new
    diag = {"z": test.statistic, "p_value": test.p_value, "p1": p1, "p2": p2,
            "n1": state.n1, "n2": n_new}
    if test.degenerate:
        diag["degenerate"] = True
    if not test.degenerate and test.p_value < alpha and p2 > p1:
        return StepdState(n_new, errors_new), Verdict(True, diag)
    return StepdState(state.n1 + n_new, state.e1 + errors_new), Verdict(False, diag)


# ---------------------------------------------------------------------------
# PERM

@dataclass(frozen=True)
class PermParams:
    n_permutations: int = 100
    significance: float = 0.01
    rate_of_change: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_permutations < 1:
            raise ValueError("n_permutations must be at least 1")
        if not 0.0 < self.significance < 1.0:
            raise ValueError("significance must lie in (0, 1)")


FitFn = Callable[[np.ndarray, np.ndarray, int], object]


def _risk(fit: FitFn, X_tr, y_tr, X_te, y_te, seed: int) -> float:
    model = fit(X_tr, y_tr, seed)
    return stats.mse(model.predict_proba(X_te), y_te)


def perm_statistic(ordered_risk: float, permuted_risks, rate_of_change: float = 0.0) -> float:
    """``(1 + #{i: R_ord - R_i <= rate_of_change}) / (P + 1)``."""
    r = np.asarray(permuted_risks, dtype=float)
    hits = int(np.sum(ordered_risk - r <= rate_of_change))
    return (1 + hits) / (r.size + 1)


def perm_detect(prev: tuple[np.ndarray, np.ndarray], new: tuple[np.ndarray, np.ndarray],
                fit: FitFn, params: PermParams = PermParams()) -> Verdict:
    """Permutation test on the risk of training on ``prev`` and testing on ``new``.

    ``fit(X, y, seed)`` must return a model with ``predict_proba``. A failed
    fit on a permuted split counts as evidence against drift.
    """
    X1, y1 = prev
    X2, y2 = new
    for name, y in (("previous", y1), ("new", y2)):
        if len(y) == 0 or np.min(y) == np.max(y):
            return Verdict(False, {"skipped": f"{name} period lacks a class"})
    try:
        r_ord = _risk(fit, X1, y1, X2, y2, params.seed)
    except ValueError as exc:
        return Verdict(False, {"skipped": f"ordered fit failed: {exc}"})

    X = np.concatenate([X1, X2])
    y = np.concatenate([y1, y2])
    n1 = len(y1)
    rng = np.random.default_rng(params.seed)
    risks = []
    failed = 0
    for i in range(params.n_permutations):
        perm = rng.permutation(len(y))
        a, b = perm[:n1], perm[n1:]
        try:
            risks.append(_risk(fit, X[a], y[a], X[b], y[b], params.seed + i + 1))
        except ValueError:
            failed += 1
            risks.append(math.inf)  # R_ord - inf <= delta, so the indicator is 1
    ratio = perm_statistic(r_ord, risks, params.rate_of_change)
    return Verdict(ratio <= params.significance,
                   {"ordered_risk": r_ord, "ratio": ratio,
                    "mean_permuted_risk": float(np.mean([r for r in risks if np.isfinite(r)]))
                    if failed < len(risks) else float("nan"),
                    "n_permutations": params.n_permutations, "failed_fits": failed})


# ---------------------------------------------------------------------------
# stateful wrappers used by the engine

class Detector:
    """Uniform per-period interface: ``observe(model, prev, new) -> Verdict``."""

    name = "detector"
    needs_model_errors = True

    def observe(self, model, prev, new) -> Verdict:
        raise NotImplementedError

    def reset(self) -> None:
        pass


def _errors(model, X, y) -> tuple[int, int]:
    pred = model.predict_proba(X) > 0.5
    return int(np.sum(pred != (np.asarray(y) == 1))), len(y)


class DDM(Detector):
    name = "ddm"

    def __init__(self):
        self.state = DdmState()

    def observe(self, model, prev, new) -> Verdict:
        X, y = new
        if len(y) == 0:
            return Verdict(False, {"skipped": "empty period"})
        errors, n = _errors(model, X, y)
        self.state, verdict = ddm_observe(self.state, errors / n, n)
        return verdict

    def reset(self) -> None:
        self.state = DdmState()


class STEPD(Detector):
    name = "stepd"

    def __init__(self, alpha: float = STEPD_ALPHA):
        self.alpha = alpha
        self.state = StepdState()

    def observe(self, model, prev, new) -> Verdict:
        X, y = new
        if len(y) == 0:
            return Verdict(False, {"skipped": "empty period"})
        errors, n = _errors(model, X, y)
        self.state, verdict = stepd_observe(self.state, errors, n, self.alpha)
        return verdict

    def reset(self) -> None:
        self.state = StepdState()


class PERM(Detector):
    name = "perm"
    needs_model_errors = False

    def __init__(self, fit: FitFn, params: PermParams = PermParams()):
        self.fit = fit
        self.params = params
        self._calls = 0

    def observe(self, model, prev, new) -> Verdict:
        self._calls += 1
        params = replace(self.params, seed=self.params.seed + 7919 * self._calls)
        return perm_detect(prev, new, self.fit, params)
