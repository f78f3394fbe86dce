"""Operation-data ingestion, time partitioning, rebalancing and synthetic streams."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

log = logging.getLogger(__name__)

#: Negatives kept per positive when rebalancing training windows.
DEFAULT_UNDERSAMPLE_RATIO = 10


class DataError(ValueError):
    pass


class MissingColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"missing column {name!r}")
        self.name = name


class UnparsableValue(DataError):
    def __init__(self, row: int, column: str, value: str = ""):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r}")
        self.row = row
        self.column = column


class EmptyDataset(DataError):
    pass


class ZeroSpan(DataError):
    pass


class NoPositives(DataError):
    pass


class InvalidSpec(DataError):
    pass


@dataclass(frozen=True)
class Sample:
    features: tuple[float, ...]
    label: int
    timestamp: int


@dataclass(frozen=True)
class DatasetSchema:
    feature_columns: tuple[str, ...]
    label_column: str
    label_positive_value: str
    timestamp_column: str
    timestamp_format: str = "epoch_seconds"

    def __post_init__(self):
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        cols = [*self.feature_columns, self.label_column, self.timestamp_column]
        if len(set(cols)) != len(cols):
            raise DataError("schema column names must be distinct")
        if self.timestamp_format not in ("epoch_seconds", "iso8601"):
            raise DataError(f"unknown timestamp_format {self.timestamp_format!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        return cls(
            feature_columns=tuple(d["feature_columns"]),
            label_column=d["label_column"],
            label_positive_value=str(d["label_positive_value"]),
            timestamp_column=d["timestamp_column"],
            timestamp_format=d.get("timestamp_format", "epoch_seconds"),
        )

    def to_dict(self) -> dict:
        return {
            "feature_columns": list(self.feature_columns),
            "label_column": self.label_column,
            "label_positive_value": self.label_positive_value,
            "timestamp_column": self.timestamp_column,
            "timestamp_format": self.timestamp_format,
        }


class Granularity(str, Enum):
    DAY = "day"
    WEEK = "week"
    MONTH = "month"
    FIXED_COUNT = "fixed_count"


@dataclass(frozen=True, eq=False)
class Period:
    """One time bucket ``[start, end)``; features and labels stored as arrays."""

    index: int
    start: float
    end: float
    X: np.ndarray
    y: np.ndarray
    timestamps: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.y.size)

    @property
    def n_positive(self) -> int:
        return int(self.y.sum())

    @property
    def positive_rate(self) -> float:
        return self.n_positive / self.n_samples if self.n_samples else float("nan")

    @property
    def samples(self) -> list[Sample]:
        return [Sample(tuple(float(v) for v in x), int(lbl), int(ts))
                for x, lbl, ts in zip(self.X, self.y, self.timestamps)]


@dataclass(frozen=True, eq=False)
class PeriodizedDataset:
    periods: tuple[Period, ...]
    granularity: Granularity
    feature_names: tuple[str, ...] = ()

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    @property
    def n_features(self) -> int:
        return int(self.periods[0].X.shape[1])

    def period(self, index: int) -> Period:
        """1-based period lookup."""
        return self.periods[index - 1]

    def window(self, first: int, last: int) -> tuple[np.ndarray, np.ndarray]:
        """Concatenate periods ``first..last`` (1-based, inclusive)."""
        first = max(first, 1)
        chosen = self.periods[first - 1:last]
        X = np.concatenate([p.X for p in chosen], axis=0)
        y = np.concatenate([p.y for p in chosen])
        return X, y

    def fingerprint(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for p in self.periods:
            h.update(np.ascontiguousarray(p.X).tobytes())
            h.update(np.ascontiguousarray(p.y).tobytes())
            h.update(np.ascontiguousarray(p.timestamps).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class SyntheticStreamSpec:
    n_periods: int
    samples_per_period: int
    n_features: int
    concept_schedule: tuple[tuple[int, int], ...] = ((1, 0),)
    noise_rate: float = 0.0
    positive_rate_target: float = 0.3
    seed: int = 0
    start_timestamp: int = 1_600_041_600  # a UTC midnight

    def __post_init__(self):
        object.__setattr__(self, "concept_schedule",
                           tuple((int(i), int(c)) for i, c in self.concept_schedule))

    def validate(self) -> None:
        if self.n_periods < 1 or self.samples_per_period < 1 or self.n_features < 1:
            raise InvalidSpec("n_periods, samples_per_period and n_features must be positive")
        if not 0.0 <= self.noise_rate < 0.5:
            raise InvalidSpec("noise_rate must lie in [0, 0.5)")
        if not 0.0 < self.positive_rate_target < 1.0:
            raise InvalidSpec("positive_rate_target must lie in (0, 1)")
        idx = [i for i, _ in self.concept_schedule]
        if not idx or idx[0] != 1 or any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidSpec("concept_schedule indices must start at 1 and strictly increase")

    def concept_at(self, period_index: int) -> int:
        active = self.concept_schedule[0][1]
        for start, concept in self.concept_schedule:
            if start <= period_index:
                active = concept
        return active

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticStreamSpec":
        d = dict(d)
        d["concept_schedule"] = tuple(tuple(x) for x in d.get("concept_schedule", [(1, 0)]))
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "n_periods": self.n_periods,
            "samples_per_period": self.samples_per_period,
            "n_features": self.n_features,
            "concept_schedule": [list(x) for x in self.concept_schedule],
            "noise_rate": self.noise_rate,
            "positive_rate_target": self.positive_rate_target,
            "seed": self.seed,
            "start_timestamp": self.start_timestamp,
        }


# ---------------------------------------------------------------------------
# CSV ingestion

def _parse_timestamp(raw: str, fmt: str) -> int:
    if fmt == "epoch_seconds":
        return int(float(raw))
    ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return int(ts.timestamp())


def load_csv(path: str | Path, schema: DatasetSchema) -> list[Sample]:
    """Read one :class:`Sample` per data row, in file order.

    Row numbers in errors are 1-based data rows (the header is row 0).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (*schema.feature_columns, schema.label_column, schema.timestamp_column):
            if col not in header:
                raise MissingColumn(col)
        samples = []
        for row_no, row in enumerate(reader, start=1):
            feats = []
            for col in schema.feature_columns:
                raw = (row[col] or "").strip()
                try:
                    value = float(raw)
                except ValueError:
                    raise UnparsableValue(row_no, col, raw) from None
                feats.append(value)
            raw_ts = (row[schema.timestamp_column] or "").strip()
            try:
                ts = _parse_timestamp(raw_ts, schema.timestamp_format)
            except ValueError:
                raise UnparsableValue(row_no, schema.timestamp_column, raw_ts) from None
            label = int((row[schema.label_column] or "").strip() == schema.label_positive_value)
            samples.append(Sample(tuple(feats), label, ts))
    if not samples:
        raise EmptyDataset(f"{path} has no data rows")
    return samples


def samples_to_arrays(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not samples:
        raise EmptyDataset("no samples")
    width = len(samples[0].features)
    if any(len(s.features) != width for s in samples):
        raise DataError("samples disagree on feature count")
    X = np.array([s.features for s in samples], dtype=float).reshape(len(samples), width)
    y = np.array([s.label for s in samples], dtype=np.int8)
    t = np.array([s.timestamp for s in samples], dtype=np.int64)
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    return X, y, t


# ---------------------------------------------------------------------------
# partitioning

_DAY = 86_400


def _calendar_edges(t_min: int, t_max: int, granularity: Granularity) -> list[int]:
    first = datetime.fromtimestamp(t_min, tz=timezone.utc)
    first = first.replace(hour=0, minute=0, second=0, microsecond=0)
    if granularity is Granularity.WEEK:
        first -= timedelta(days=first.weekday())  # Monday start
    elif granularity is Granularity.MONTH:
        first = first.replace(day=1)
    edges = [int(first.timestamp())]
    cur = first
    while edges[-1] <= t_max:
        if granularity is Granularity.DAY:
            cur = cur + timedelta(days=1)
        elif granularity is Granularity.WEEK:
            cur = cur + timedelta(days=7)
        else:
            cur = cur.replace(year=cur.year + cur.month // 12, month=cur.month % 12 + 1)
        edges.append(int(cur.timestamp()))
    return edges


def partition_periods(samples: Sequence[Sample] | tuple, granularity: Granularity | str,
                      n_periods_hint: int | None = None,
                      feature_names: Iterable[str] = ()) -> PeriodizedDataset:
    """Bucket samples into contiguous, time-ordered periods.

    ``samples`` may also be an ``(X, y, timestamps)`` array triple. Calendar
    buckets follow UTC boundaries and empty buckets are kept.
    """
    granularity = Granularity(granularity)
    if isinstance(samples, tuple) and len(samples) == 3 and isinstance(samples[0], np.ndarray):
        X, y, t = samples
    else:
        X, y, t = samples_to_arrays(samples)
    if y.size == 0:
        raise EmptyDataset("no samples")

    t_min, t_max = int(t.min()), int(t.max())
    if granularity is Granularity.FIXED_COUNT:
        if not n_periods_hint or n_periods_hint < 1:
            raise DataError("fixed_count partitioning needs a positive n_periods_hint")
        if t_max == t_min:
            raise ZeroSpan("all timestamps are identical")
        n = n_periods_hint
        edges = t_min + (t_max - t_min) * np.arange(n + 1) / n
        edges = edges.astype(float)
        edges[-1] = np.nextafter(float(t_max), np.inf)
        bucket = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, n - 1)
    else:
        edges = np.array(_calendar_edges(t_min, t_max, granularity), dtype=float)
        bucket = np.searchsorted(edges, t, side="right") - 1

    order = np.argsort(t, kind="stable")
    periods = []
    for k in range(len(edges) - 1):
        sel = order[bucket[order] == k]
        periods.append(Period(k + 1, float(edges[k]), float(edges[k + 1]),
                              X[sel], y[sel], t[sel]))
    return PeriodizedDataset(tuple(periods), granularity, tuple(feature_names))


# ---------------------------------------------------------------------------
# rebalancing

def undersample(X: np.ndarray, y: np.ndarray, ratio_neg_per_pos: int = DEFAULT_UNDERSAMPLE_RATIO,
                seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Keep every positive and at most ``ratio * #positives`` random negatives.

    The kept rows are returned in a seeded shuffled order.
    """
    if ratio_neg_per_pos < 1:
        raise DataError("ratio must be at least 1")
    y = np.asarray(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if pos.size == 0:
        raise NoPositives("no positive samples to balance against")
    rng = np.random.default_rng(seed)
    cap = ratio_neg_per_pos * pos.size
    if neg.size > cap:
        neg = rng.choice(neg, size=cap, replace=False)
    keep = rng.permutation(np.concatenate([pos, neg]))
    return X[keep], y[keep]


# ---------------------------------------------------------------------------
# synthetic streams

def concept_directions(spec: SyntheticStreamSpec, concept_ids: Iterable[int]) -> dict[int, np.ndarray]:
    """Unit weight vector for each concept.

    Ids below ``n_features`` map to columns of one seeded orthonormal basis,
    so distinct small ids give orthogonal concepts.
    """
    d = spec.n_features
    basis_rng = np.random.default_rng([spec.seed, 0xC0])
    q, _ = np.linalg.qr(basis_rng.standard_normal((d, d)))
    out = {}
    for cid in concept_ids:
        if 0 <= cid < d:
            out[cid] = q[:, cid].copy()
        else:
            v = np.random.default_rng([spec.seed, 0xC1, cid]).standard_normal(d)
            out[cid] = v / np.linalg.norm(v)
    return out


def generate_synthetic(spec: SyntheticStreamSpec) -> PeriodizedDataset:
    """Daily periods of Gaussian features labelled by linear-threshold concepts.

    Features are standard normal, so with a unit weight vector the score is
    standard normal and the threshold ``Phi^-1(1 - target)`` gives the target
    positive rate before label noise.
    """
    spec.validate()
    directions = concept_directions(spec, {c for _, c in spec.concept_schedule})
    threshold = float(norm.ppf(1.0 - spec.positive_rate_target))
    periods = []
    for k in range(1, spec.n_periods + 1):
        rng = np.random.default_rng([spec.seed, 0xDA, k])
        n = spec.samples_per_period
        X = rng.standard_normal((n, spec.n_features))
        clean = (X @ directions[spec.concept_at(k)] > threshold).astype(np.int8)
        flip = rng.random(n) < spec.noise_rate
        y = np.where(flip, 1 - clean, clean).astype(np.int8)
        start = spec.start_timestamp + (k - 1) * _DAY
        t = np.sort(rng.integers(start, start + _DAY, size=n))
        periods.append(Period(k, float(start), float(start + _DAY), X, y, t))
    names = tuple(f"f{j}" for j in range(spec.n_features))
    return PeriodizedDataset(tuple(periods), Granularity.DAY, names)


def dataset_to_samples(data: PeriodizedDataset) -> list[Sample]:
    out: list[Sample] = []
    for p in data.periods:
        out.extend(p.samples)
    return out
