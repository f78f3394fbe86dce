"""Period-replay experiment engine.

:func:`run_policy` trains an initial model on the first half of the
periods, then walks ``i = N/2+1 .. N-1``: the policy may update its model
using data up to period ``i``, and the current model is scored on period
``i+1``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Callable

import numpy as np

from . import ensembles, stats
from .data import DEFAULT_UNDERSAMPLE_RATIO, NoPositives, PeriodizedDataset, undersample
from .drift import DDM, PERM, STEPD, Detector, PermParams, Verdict
from .learners import (
    ConstantModel,
    HoeffdingTree,
    LearnerFamily,
    Model,
    get_learner,
    space_from_dict,
    tune_random_search,
)

log = logging.getLogger(__name__)

DEFAULT_ORACLE_REPETITIONS = 100
DEFAULT_ORACLE_ALPHA = 0.05


class EngineError(ValueError):
    pass


class InsufficientPeriods(EngineError):
    pass


class SingleClassWindow(EngineError):
    pass


class PolicyKind(str, Enum):
    STATIONARY = "stationary"
    PERIODIC = "periodic"
    DRIFT = "drift"
    ENSEMBLE = "ensemble"
    ONLINE = "online"
    ORACLE = "oracle"


#: Kinds whose model is replaced wholesale by a retrain.
RETRAINING_KINDS = (PolicyKind.PERIODIC, PolicyKind.DRIFT, PolicyKind.ORACLE)


@dataclass(frozen=True)
class PolicyConfig:
    name: str
    kind: PolicyKind
    learner: str = "cart"
    detector: str | None = None          # ddm | perm | stepd
    ensemble: str | None = None          # sea | awe | aue
    hyperparams: dict = field(default_factory=dict)
    search_space: dict | None = None     # serialized form, see learners.space_from_dict
    window: int | None = None            # None -> N // 2
    tune_budget: int = 0                 # 0 -> use the hyperparameters as given
    retune: bool = False
    undersample_ratio: int | None = DEFAULT_UNDERSAMPLE_RATIO
    oracle_repetitions: int = DEFAULT_ORACLE_REPETITIONS
    oracle_alpha: float = DEFAULT_ORACLE_ALPHA
    perm: PermParams = field(default_factory=PermParams)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind is PolicyKind.DRIFT and self.detector not in ("ddm", "perm", "stepd"):
            raise EngineError(f"policy {self.name!r}: drift kind needs detector ddm|perm|stepd")
        if self.kind is PolicyKind.ENSEMBLE and self.ensemble not in ("sea", "awe", "aue"):
            raise EngineError(f"policy {self.name!r}: ensemble kind needs sea|awe|aue")
        if self.kind is PolicyKind.ONLINE or self.ensemble == "aue":
            object.__setattr__(self, "learner", "ht")
        if not 0.0 < self.oracle_alpha < 1.0:
            raise EngineError("oracle_alpha must lie in (0, 1)")
        if self.oracle_repetitions < 2:
            raise EngineError("oracle_repetitions must be at least 2")
        if self.window is not None and self.window < 1:
            raise EngineError("window must be positive")
        if self.tune_budget < 0:
            raise EngineError("tune_budget must be non-negative")
        family = get_learner(self.learner)
        family.params(self.hyperparams)  # rejects unknown names

    @property
    def family(self) -> LearnerFamily:
        return get_learner(self.learner)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        d = dict(d)
        perm = d.pop("perm", None) or {}
        return cls(**d, perm=PermParams(**perm))


@dataclass
class PeriodRecord:
    period_index: int
    auc: float | None
    f1: float | None
    mcc: float | None
    retrained: bool
    drift_verdict: Verdict | None
    train_time_s: float
    test_time_s: float
    n_samples: int = 0
    n_positive: int = 0
    auc_without_update: float | None = None
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["drift_verdict"] = self.drift_verdict.to_dict() if self.drift_verdict else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodRecord":
        d = dict(d)
        v = d.get("drift_verdict")
        d["drift_verdict"] = Verdict.from_dict(v) if v else None
        return cls(**d)


@dataclass
class RunResult:
    policy: dict
    seed: int
    records: list[PeriodRecord]
    overall_auc: float | None
    overall_f1: float | None
    overall_mcc: float | None
    total_train_time_s: float
    total_test_time_s: float
    hyperparams: dict = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def retrain_count(self) -> int:
        return sum(r.retrained for r in self.records)

    @property
    def opportunities(self) -> int:
        return len(self.records)

    @property
    def period_aucs(self) -> list[float]:
        return [r.auc for r in self.records if r.auc is not None]

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "records": [r.to_dict() for r in self.records],
            "overall_auc": self.overall_auc,
            "overall_f1": self.overall_f1,
            "overall_mcc": self.overall_mcc,
            "total_train_time_s": self.total_train_time_s,
            "total_test_time_s": self.total_test_time_s,
            "hyperparams": self.hyperparams,
            "diagnostics": list(self.diagnostics),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        d = dict(d)
        d["records"] = [PeriodRecord.from_dict(r) for r in d["records"]]
        return cls(**d)


# ---------------------------------------------------------------------------
# seeds

def derive_seed(seed: int, *parts: int) -> int:
    """Stable 63-bit child seed of ``seed`` and integer ``parts``."""
    ss = np.random.SeedSequence([seed % 2**64, *[p % 2**32 for p in parts]])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


_TAG_TUNE, _TAG_INIT, _TAG_RETRAIN, _TAG_DETECT, _TAG_ENSEMBLE, _TAG_ORACLE = range(1, 7)


# ---------------------------------------------------------------------------
# hypothesized-optimal retraining

@dataclass
class OracleDecision:
    adopt: bool
    candidate: Model | None
    test: stats.TestResult | None
    candidate_aucs: list[float]
    incumbent_aucs: list[float]
    note: str = ""


def oracle_step(fit: Callable[[np.ndarray, np.ndarray, int], Model],
                incumbent_window: tuple[np.ndarray, np.ndarray],
                candidate_window: tuple[np.ndarray, np.ndarray],
                next_period: tuple[np.ndarray, np.ndarray],
                repetitions: int = DEFAULT_ORACLE_REPETITIONS,
                alpha: float = DEFAULT_ORACLE_ALPHA, seed: int = 0) -> OracleDecision:
    """Decide whether retraining now would significantly help on the next period.

    ``repetitions`` refits of the incumbent's window and of the newest window
    are scored on ``next_period``; a Mann-Whitney U test (p <= alpha) with a
    higher candidate median adopts the first candidate fit.
    """
    if repetitions < 2:
        raise EngineError("repetitions must be at least 2")
    X_next, y_next = next_period
    if len(y_next) == 0 or np.min(y_next) == np.max(y_next):
        return OracleDecision(False, None, None, [], [], "next period lacks a class")

    def aucs(window, tag):
        out, models = [], []
        for r in range(repetitions):
            try:
                m = fit(window[0], window[1], derive_seed(seed, tag, r))
                out.append(stats.auc(m.predict_proba(X_next), y_next))
                models.append(m)
            except ValueError:
                continue
        return out, models

    cand_aucs, cand_models = aucs(candidate_window, 1)
    inc_aucs, _ = aucs(incumbent_window, 2)
    if len(cand_aucs) < 2 or len(inc_aucs) < 2:
        return OracleDecision(False, None, None, cand_aucs, inc_aucs, "too few successful fits")
    test = stats.mann_whitney_u(cand_aucs, inc_aucs)
    better = float(np.median(cand_aucs)) > float(np.median(inc_aucs))
    adopt = test.p_value <= alpha and better
    return OracleDecision(adopt, cand_models[0] if adopt else None, test, cand_aucs, inc_aucs)


# ---------------------------------------------------------------------------
# run

class _EnsembleModel:
    def __init__(self, state: ensembles.EnsembleState, n_features: int):
        self.state = state
        self.n_features = n_features

    def predict_proba(self, X):
        return ensembles.predict(self.state, X)


def _make_detector(policy: PolicyConfig, fit, seed: int) -> Detector:
    if policy.detector == "ddm":
        return DDM()
    if policy.detector == "stepd":
        return STEPD()
    return PERM(fit, replace(policy.perm, seed=derive_seed(seed, _TAG_DETECT)))


def run_policy(data: PeriodizedDataset, policy: PolicyConfig,
               seed: int | None = None) -> RunResult:
    seed = policy.seed if seed is None else seed
    n = data.n_periods
    if n < 4:
        raise InsufficientPeriods(f"need at least 4 periods, got {n}")
    half = n // 2
    window = policy.window or half
    if window > half:
        raise EngineError(f"window {window} exceeds N/2 = {half}")

    family = policy.family
    hp = family.params(policy.hyperparams)
    diagnostics: list[str] = []
    d = data.n_features

    def prepare(X, y, s):
        if not policy.undersample_ratio or family.online:
            return X, y
        try:
            return undersample(X, y, policy.undersample_ratio, s)
        except NoPositives:
            log.warning("training data has no positives; under-sampling skipped")
            return X, y

    def fit(X, y, s, params=None):
        Xp, yp = prepare(X, y, s)
        return family.fit(Xp, yp, params or hp, s)

    def raw_fit(X, y, s):
        return family.fit(X, y, hp, s)

    def check_window(X, y, first, last):
        if len(y) == 0 or y.min() == y.max():
            raise SingleClassWindow(f"periods {first}..{last} lack a class")

    def tune(first: int, last: int, s: int) -> None:
        nonlocal hp
        if policy.tune_budget < 1 or family.online or last - first < 1:
            return
        X_tr, y_tr = data.window(first, last - 1)
        X_va, y_va = data.window(last, last)
        if len(y_tr) == 0 or y_tr.min() == y_tr.max() or len(y_va) == 0 or y_va.min() == y_va.max():
            diagnostics.append(f"tuning on {first}..{last} skipped: a split lacks a class")
            return
        space = space_from_dict(policy.search_space) if policy.search_space else None
        X_tr, y_tr = prepare(X_tr, y_tr, s)
        result = tune_random_search(family, space, policy.tune_budget, (X_tr, y_tr),
                                    (X_va, y_va), s, base=hp)
        hp = result.params

    # ---- initial model on periods 1..N/2
    t0 = time.perf_counter()
    tune(1, half, derive_seed(seed, _TAG_TUNE))
    kind = policy.kind
    state = None
    model: Model | None = None
    model_window = (1, half)
    if kind is PolicyKind.ENSEMBLE:
        if policy.ensemble == "aue":
            base_fit = ensembles.new_tree_factory(d, hp)
        else:
            def base_fit(X, y, s):
                return fit(X, y, s)
        state = ensembles.EnsembleState(policy.ensemble, window)
        for k in range(1, half + 1):
            p = data.period(k)
            state = ensembles.on_new_period(state, p.X, p.y, base_fit,
                                            derive_seed(seed, _TAG_ENSEMBLE, k), k)
        model = _EnsembleModel(state, d)
    elif kind is PolicyKind.ONLINE:
        model = HoeffdingTree.from_params(d, hp)
        for k in range(1, half + 1):
            p = data.period(k)
            for xi, yi in zip(p.X, p.y):
                model.learn_one(xi, int(yi))
    else:
        X0, y0 = data.window(1, half)
        check_window(X0, y0, 1, half)
        model = fit(X0, y0, derive_seed(seed, _TAG_INIT))
    initial_time = time.perf_counter() - t0

    detector = _make_detector(policy, raw_fit, seed) if kind is PolicyKind.DRIFT else None

    records: list[PeriodRecord] = []
    all_scores, all_labels = [], []
    total_train = initial_time
    total_test = 0.0
    for i in range(half + 1, n):
        cur = data.period(i)
        nxt = data.period(i + 1)
        notes: list[str] = []
        verdict = None
        retrained = False
        previous = model

        t0 = time.perf_counter()
        want_retrain = kind is PolicyKind.PERIODIC
        if kind is PolicyKind.DRIFT:
            if cur.n_samples == 0:
                notes.append("empty period: detection skipped")
            else:
                prev = data.period(i - 1)
                verdict = detector.observe(model, (prev.X, prev.y), (cur.X, cur.y))
                want_retrain = verdict.drift
        if want_retrain:
            first = i - window + 1
            Xw, yw = data.window(first, i)
            try:
                check_window(Xw, yw, first, i)
                if policy.retune:
                    tune(first, i, derive_seed(seed, _TAG_TUNE, i))
                model = fit(Xw, yw, derive_seed(seed, _TAG_RETRAIN, i))
                model_window = (first, i)
                retrained = True
            except SingleClassWindow as exc:
                notes.append(f"retrain skipped: {exc}")
        elif kind is PolicyKind.ENSEMBLE:
            state = ensembles.on_new_period(state, cur.X, cur.y, base_fit,
                                            derive_seed(seed, _TAG_ENSEMBLE, i), i)
            model = _EnsembleModel(state, d)
            retrained = "skipped" not in state.last_update
            if not retrained:
                notes.append(f"ensemble update skipped: {state.last_update['skipped']}")
        elif kind is PolicyKind.ONLINE:
            for xi, yi in zip(cur.X, cur.y):
                model.learn_one(xi, int(yi))
            retrained = cur.n_samples > 0
        elif kind is PolicyKind.ORACLE:
            first = i - window + 1
            decision = oracle_step(
                fit, data.window(*model_window), data.window(first, i), (nxt.X, nxt.y),
                policy.oracle_repetitions, policy.oracle_alpha,
                derive_seed(seed, _TAG_ORACLE, i))
            verdict = Verdict(decision.adopt, {
                "p_value": decision.test.p_value if decision.test else None,
                "candidate_median_auc": float(np.median(decision.candidate_aucs))
                if decision.candidate_aucs else None,
                "incumbent_median_auc": float(np.median(decision.incumbent_aucs))
                if decision.incumbent_aucs else None,
                "note": decision.note,
            })
            if decision.adopt:
                model = decision.candidate
                model_window = (first, i)
                retrained = True
        train_time = time.perf_counter() - t0

        t1 = time.perf_counter()
        try:
            scores = model.predict_proba(nxt.X) if nxt.n_samples else np.empty(0)
        except ensembles.EnsembleError as exc:
            notes.append(f"constant 0.5 scores: {exc}")
            scores = ConstantModel(d, 0.5).predict_proba(nxt.X)
        test_time = time.perf_counter() - t1

        auc = f1 = mcc = None
        if nxt.n_samples:
            f1, mcc = stats.f1_mcc(scores, nxt.y)
            if 0 < nxt.n_positive < nxt.n_samples:
                auc = stats.auc(scores, nxt.y)
            else:
                notes.append("evaluation period lacks a class: AUC undefined")
        auc_without = None
        if retrained and kind in RETRAINING_KINDS and auc is not None:
            auc_without = stats.auc(previous.predict_proba(nxt.X), nxt.y)

        all_scores.append(scores)
        all_labels.append(nxt.y)
        total_train += train_time
        total_test += test_time
        records.append(PeriodRecord(i + 1, auc, f1, mcc, retrained, verdict, train_time,
                                    test_time, nxt.n_samples, nxt.n_positive, auc_without, notes))

    scores = np.concatenate(all_scores)
    labels = np.concatenate(all_labels)
    overall_auc = overall_f1 = overall_mcc = None
    if labels.size:
        overall_f1, overall_mcc = stats.f1_mcc(scores, labels)
        if 0 < labels.sum() < labels.size:
            overall_auc = stats.auc(scores, labels)
    return RunResult(policy.to_dict(), seed, records, overall_auc, overall_f1, overall_mcc,
                     total_train, total_test, _jsonable(hp), diagnostics)


def _jsonable(hp: dict) -> dict:
    out = {}
    for k, v in hp.items():
        if isinstance(v, np.generic):
            v = v.item()
        out[k] = v
    return out


TIMING_FIELDS = ("train_time_s", "test_time_s", "total_train_time_s", "total_test_time_s")


def strip_timing(obj: Any) -> Any:
    """Copy of a nested dict/list structure without wall-clock fields."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_FIELDS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj
