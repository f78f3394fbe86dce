"""Learner contract shared by batch and online models."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol, Sequence

import numpy as np

HyperParams = dict[str, Any]


class LearnerError(ValueError):
    pass


class SingleClassData(LearnerError):
    pass


class FeatureCountMismatch(LearnerError):
    pass


class Model(Protocol):
    """A fitted binary scorer. ``predict_proba`` returns P(y=1) per row."""

    n_features: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...


class OnlineModel(Model, Protocol):
    def learn_one(self, x: np.ndarray, y: int) -> None: ...


def check_features(model: Model, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise FeatureCountMismatch(f"expected {model.n_features} features, got {X.shape[1]}")
    return X


def score_one(model: Model, x: Sequence[float]) -> float:
    return float(model.predict_proba(np.asarray(x, dtype=float).reshape(1, -1))[0])


@dataclass
class ConstantModel:
    """Scores every row with the same probability."""

    n_features: int
    value: float

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = check_features(self, X)
        return np.full(X.shape[0], self.value)


# ---------------------------------------------------------------------------
# search spaces

@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))

    def contains(self, v) -> bool:
        return self.low <= v <= self.high


@dataclass(frozen=True)
class LogUniform:
    low: float
    high: float

    def sample(self, rng: np.random.Generator) -> float:
        return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))

    def contains(self, v) -> bool:
        return self.low * (1 - 1e-12) <= v <= self.high * (1 + 1e-12)


@dataclass(frozen=True)
class IntRange:
    """Integers ``low..high`` inclusive."""

    low: int
    high: int

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.low, self.high + 1))

    def contains(self, v) -> bool:
        return float(v).is_integer() and self.low <= v <= self.high


@dataclass(frozen=True)
class Choice:
    values: tuple

    def sample(self, rng: np.random.Generator):
        return self.values[int(rng.integers(len(self.values)))]

    def contains(self, v) -> bool:
        return v in self.values


SearchSpace = Mapping[str, Any]


def space_from_dict(d: Mapping[str, Mapping]) -> dict[str, Any]:
    """Build a search space from ``{"name": {"type": "int", "low": 2, "high": 9}}`` entries."""
    kinds = {"uniform": Uniform, "log_uniform": LogUniform, "int": IntRange}
    out = {}
    for name, entry in d.items():
        kind = entry["type"]
        if kind == "choice":
            out[name] = Choice(tuple(entry["values"]))
        else:
            out[name] = kinds[kind](entry["low"], entry["high"])
    return out


def sample_config(space: SearchSpace, rng: np.random.Generator) -> HyperParams:
    return {name: dist.sample(rng) for name, dist in space.items()}


def space_size(space: SearchSpace) -> int | None:
    """Number of distinct configurations, or None when any axis is continuous."""
    total = 1
    for dist in space.values():
        if isinstance(dist, Choice):
            total *= len(dist.values)
        elif isinstance(dist, IntRange):
            total *= dist.high - dist.low + 1
        else:
            return None
    return total


FitFn = Callable[[np.ndarray, np.ndarray, HyperParams, int], Model]


@dataclass(frozen=True)
class LearnerFamily:
    name: str
    fit: FitFn
    defaults: HyperParams
    search_space: SearchSpace = field(default_factory=dict)
    online: bool = False

    def params(self, overrides: Mapping[str, Any] | None = None) -> HyperParams:
        hp = dict(self.defaults)
        if overrides:
            unknown = set(overrides) - set(hp)
            if unknown:
                raise LearnerError(f"unknown hyperparameters for {self.name}: {sorted(unknown)}")
            hp.update(overrides)
        return hp
