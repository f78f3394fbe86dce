"""Experiment configuration and result persistence (schema-versioned JSON)."""
from __future__ import annotations

import hashlib
import json
import math
import platform
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .data import (
    DataError,
    DatasetSchema,
    Granularity,
    PeriodizedDataset,
    SyntheticStreamSpec,
    generate_synthetic,
    load_csv,
    partition_periods,
)
from .engine import PolicyConfig, RunResult
from .stats import DEFAULT_HOURLY_RATE

SCHEMA_VERSION = 1
DEFAULT_REPETITIONS = 100


class ConfigError(DataError):
    pass


def parse_granularity(text: str) -> tuple[Granularity, int | None]:
    """``day|week|month|fixed:<n>`` -> (granularity, n_periods_hint)."""
    if text.startswith("fixed:"):
        try:
            n = int(text.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad granularity {text!r}") from None
        return Granularity.FIXED_COUNT, n
    try:
        return Granularity(text), None
    except ValueError:
        raise ConfigError(f"bad granularity {text!r}") from None


def run_seed(base_seed: int, policy_name: str, repetition: int) -> int:
    """``base_seed XOR blake2b-64(policy_name, repetition)``, truncated to 63 bits."""
    digest = hashlib.blake2b(f"{policy_name}\x00{repetition}".encode(), digest_size=8).digest()
    return (base_seed ^ int.from_bytes(digest, "big")) & (2**63 - 1)


@dataclass
class ExperimentConfig:
    dataset: dict
    policies: list[PolicyConfig]
    granularity: str = "day"
    repetitions: int = DEFAULT_REPETITIONS
    base_seed: int = 0
    hourly_rate: float = DEFAULT_HOURLY_RATE
    output_dir: str = "results"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ConfigError("policy names must be unique")
        if not self.policies:
            raise ConfigError("config lists no policies")
        if not ("csv" in self.dataset) ^ ("synthetic" in self.dataset):
            raise ConfigError("dataset must have exactly one of 'csv' or 'synthetic'")

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        d = dict(d)
        version = d.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        try:
            policies = [PolicyConfig.from_dict(p) for p in d.pop("policies")]
            dataset = dict(d.pop("dataset"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        if "csv" in dataset:
            csv_part = dict(dataset["csv"])
            path = Path(csv_part["path"])
            if not path.is_absolute():
                csv_part["path"] = str(Path(base_dir) / path)
            schema = csv_part.get("schema")
            if isinstance(schema, str) and not Path(schema).is_absolute():
                csv_part["schema"] = str(Path(base_dir) / schema)
            dataset["csv"] = csv_part
        try:
            return cls(dataset=dataset, policies=policies, **d)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "dataset": self.dataset,
            "granularity": self.granularity,
            "policies": [p.to_dict() for p in self.policies],
            "repetitions": self.repetitions,
            "base_seed": self.base_seed,
            "hourly_rate": self.hourly_rate,
            "output_dir": self.output_dir,
        }

    def load_dataset(self) -> PeriodizedDataset:
        return load_dataset(self.dataset, self.granularity)


def load_dataset(dataset: dict, granularity: str = "day") -> PeriodizedDataset:
    if "synthetic" in dataset:
        return generate_synthetic(SyntheticStreamSpec.from_dict(dataset["synthetic"]))
    csv_part = dataset["csv"]
    schema = csv_part["schema"]
    if isinstance(schema, str):
        schema = json.loads(Path(schema).read_text(encoding="utf-8"))
    schema = DatasetSchema.from_dict(schema)
    gran, hint = parse_granularity(csv_part.get("granularity", granularity))
    samples = load_csv(csv_part["path"], schema)
    return partition_periods(samples, gran, hint, schema.feature_columns)


@dataclass
class ResultArchive:
    config: dict
    results: dict[str, list[RunResult]]
    environment: str = ""
    dataset_fingerprint: str = ""
    n_periods: int = 0

    @property
    def failures(self) -> list[tuple[str, int, str]]:
        return [(name, run.seed, run.error)
                for name, runs in self.results.items() for run in runs if run.error]

    def successful(self, name: str) -> list[RunResult]:
        return [r for r in self.results[name] if not r.error]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "environment": self.environment,
            "dataset_fingerprint": self.dataset_fingerprint,
            "n_periods": self.n_periods,
            "results": {name: [r.to_dict() for r in runs] for name, runs in self.results.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResultArchive":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported archive schema_version {d.get('schema_version')}")
        return cls(
            config=d["config"],
            results={name: [RunResult.from_dict(r) for r in runs]
                     for name, runs in d["results"].items()},
            environment=d.get("environment", ""),
            dataset_fingerprint=d.get("dataset_fingerprint", ""),
            n_periods=d.get("n_periods", 0),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ResultArchive":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(raw)


def environment_note() -> str:
    return (f"python {platform.python_version()}, numpy {np.__version__}, "
            f"{platform.system()} {platform.machine()}")


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj: Any) -> str:
    """JSON with non-finite floats mapped to null."""
    return json.dumps(_clean(obj), indent=1, allow_nan=False) + "\n"
