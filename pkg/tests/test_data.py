import csv
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aiopsmaint import data as D


def _ts(y, m, d, h=0):
    return int(datetime(y, m, d, h, tzinfo=timezone.utc).timestamp())


def write_rows(path, rows, header=("t", "a", "b", "failed")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


SCHEMA = D.DatasetSchema(("a", "b"), "failed", "yes", "t")


# ---------------------------------------------------------------------------
# CSV

def test_load_csv_reads_rows(tmp_path):
    p = tmp_path / "d.csv"
    write_rows(p, [(_ts(2020, 1, 1), 1.5, 2, "yes"), (_ts(2020, 1, 2), -1, 0.25, "no")])
    samples = D.load_csv(p, SCHEMA)
    assert samples == [D.Sample((1.5, 2.0), 1, _ts(2020, 1, 1)),
                       D.Sample((-1.0, 0.25), 0, _ts(2020, 1, 2))]


def test_load_csv_iso_timestamps(tmp_path):
    p = tmp_path / "d.csv"
    write_rows(p, [("2020-01-01T06:00:00Z", 1, 2, "yes"), ("2020-01-02", 1, 2, "no")])
    schema = D.DatasetSchema(("a", "b"), "failed", "yes", "t", "iso8601")
    samples = D.load_csv(p, schema)
    assert [s.timestamp for s in samples] == [_ts(2020, 1, 1, 6), _ts(2020, 1, 2)]


def test_load_csv_missing_column(tmp_path):
    p = tmp_path / "d.csv"
    write_rows(p, [(1, 2, "yes")], header=("t", "a", "failed"))
    with pytest.raises(D.MissingColumn) as info:
        D.load_csv(p, SCHEMA)
    assert info.value.name == "b"


def test_load_csv_unparsable_value_reports_row(tmp_path):
    p = tmp_path / "d.csv"
    write_rows(p, [(1, 1, 1, "no"), (2, "n/a", 1, "no")])
    with pytest.raises(D.UnparsableValue) as info:
        D.load_csv(p, SCHEMA)
    assert (info.value.row, info.value.column) == (2, "a")


def test_load_csv_empty(tmp_path):
    p = tmp_path / "d.csv"
    write_rows(p, [])
    with pytest.raises(D.EmptyDataset):
        D.load_csv(p, SCHEMA)


def test_schema_validation_and_round_trip():
    with pytest.raises(D.DataError):
        D.DatasetSchema(("a", "t"), "failed", "1", "t")
    with pytest.raises(D.DataError):
        D.DatasetSchema(("a",), "failed", "1", "t", "unix_ms")
    assert D.DatasetSchema.from_dict(SCHEMA.to_dict()) == SCHEMA


# ---------------------------------------------------------------------------
# partitioning

def _samples(timestamps, labels=None):
    labels = labels or [0] * len(timestamps)
    return [D.Sample((float(i),), y, t) for i, (t, y) in enumerate(zip(timestamps, labels))]


def test_daily_partition_keeps_empty_days():
    ts = [_ts(2020, 3, 1, 5), _ts(2020, 3, 1, 23), _ts(2020, 3, 3, 1)]
    ds = D.partition_periods(_samples(ts), "day")
    assert ds.n_periods == 3
    assert [p.n_samples for p in ds.periods] == [2, 0, 1]
    assert ds.period(1).start == _ts(2020, 3, 1)
    assert ds.period(3).end == _ts(2020, 3, 4)


def test_weekly_partition_starts_monday():
    # 2020-03-04 is a Wednesday; its week starts Monday 2020-03-02
    ts = [_ts(2020, 3, 4), _ts(2020, 3, 8, 23), _ts(2020, 3, 9)]
    ds = D.partition_periods(_samples(ts), D.Granularity.WEEK)
    assert ds.period(1).start == _ts(2020, 3, 2)
    assert [p.n_samples for p in ds.periods] == [2, 1]


def test_monthly_partition_36_months():
    ts = [_ts(2017 + k // 12, k % 12 + 1, 15) for k in range(36)]
    ds = D.partition_periods(_samples(ts), "month")
    assert ds.n_periods == 36
    assert all(p.n_samples == 1 for p in ds.periods)
    assert ds.period(12).start == _ts(2017, 12, 1)
    assert ds.period(13).start == _ts(2018, 1, 1)


def test_fixed_count_partition():
    ts = list(range(0, 100))
    ds = D.partition_periods(_samples(ts), "fixed_count", 4)
    assert ds.n_periods == 4
    assert [p.n_samples for p in ds.periods] == [25, 25, 25, 25]
    with pytest.raises(D.ZeroSpan):
        D.partition_periods(_samples([5, 5]), "fixed_count", 2)


def test_partition_accepts_arrays_and_sorts_by_time():
    X = np.arange(6, dtype=float)[:, None]
    y = np.array([0, 1, 0, 1, 0, 1], dtype=np.int8)
    t = np.array([5, 0, 4, 1, 3, 2]) * 3600 + _ts(2021, 1, 1)
    ds = D.partition_periods((X, y, t), "day")
    assert ds.n_periods == 1
    assert np.all(np.diff(ds.period(1).timestamps) >= 0)
    assert list(ds.period(1).X[:, 0]) == [1, 3, 5, 4, 2, 0]


def test_window_and_fingerprint():
    spec = D.SyntheticStreamSpec(6, 50, 3, seed=4)
    ds = D.generate_synthetic(spec)
    X, y = ds.window(2, 4)
    assert X.shape == (150, 3) and y.shape == (150,)
    X0, _ = ds.window(-3, 1)  # first clamps to 1
    assert X0.shape == (50, 3)
    assert ds.fingerprint() == D.generate_synthetic(spec).fingerprint()
    assert ds.fingerprint() != D.generate_synthetic(D.SyntheticStreamSpec(6, 50, 3, seed=5)).fingerprint()


@given(st.lists(st.integers(0, 40 * 86_400), min_size=1, max_size=60),
       st.sampled_from(["day", "week", "month"]))
@settings(max_examples=60, deadline=None)
def test_partition_properties(offsets, gran):
    base = _ts(2019, 12, 30)
    ts = [base + o for o in offsets]
    ds = D.partition_periods(_samples(ts), gran)
    assert sum(p.n_samples for p in ds.periods) == len(ts)
    for a, b in zip(ds.periods, ds.periods[1:]):
        assert a.end == b.start
    for p in ds.periods:
        assert np.all((p.timestamps >= p.start) & (p.timestamps < p.end))
    assert [p.index for p in ds.periods] == list(range(1, ds.n_periods + 1))


# ---------------------------------------------------------------------------
# under-sampling

def test_undersample_ratio_and_positives_kept():
    y = np.r_[np.ones(5, np.int8), np.zeros(200, np.int8)]
    X = np.arange(y.size, dtype=float)[:, None]
    Xs, ys = D.undersample(X, y, 10, seed=1)
    assert ys.sum() == 5 and (ys == 0).sum() == 50
    assert set(Xs[ys == 1, 0]) == {0, 1, 2, 3, 4}
    assert D.DEFAULT_UNDERSAMPLE_RATIO == 10


def test_undersample_keeps_all_when_few_negatives():
    y = np.array([1, 1, 0, 0, 0], np.int8)
    _, ys = D.undersample(np.zeros((5, 1)), y, 10)
    assert ys.size == 5


def test_undersample_no_positives():
    with pytest.raises(D.NoPositives):
        D.undersample(np.zeros((3, 1)), np.zeros(3, np.int8))


def test_undersample_deterministic():
    rng = np.random.default_rng(0)
    y = (rng.random(500) < 0.02).astype(np.int8)
    X = rng.normal(size=(500, 2))
    a = D.undersample(X, y, 10, seed=9)
    b = D.undersample(X, y, 10, seed=9)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@given(st.integers(1, 30), st.integers(0, 400), st.integers(1, 12), st.integers(0, 1000))
@settings(max_examples=50)
def test_undersample_property(n_pos, n_neg, ratio, seed):
    y = np.r_[np.ones(n_pos, np.int8), np.zeros(n_neg, np.int8)]
    _, ys = D.undersample(np.zeros((y.size, 1)), y, ratio, seed)
    assert ys.sum() == n_pos
    assert (ys == 0).sum() == min(n_neg, ratio * n_pos)


# ---------------------------------------------------------------------------
# synthetic streams

def test_synthetic_shapes_and_rates():
    spec = D.SyntheticStreamSpec(4, 4000, 5, positive_rate_target=0.2, seed=1)
    ds = D.generate_synthetic(spec)
    assert ds.n_periods == 4 and ds.n_features == 5
    assert ds.granularity is D.Granularity.DAY
    for p in ds.periods:
        assert p.n_samples == 4000
        assert abs(p.positive_rate - 0.2) < 0.03
        assert np.all((p.timestamps >= p.start) & (p.timestamps < p.end))


def test_synthetic_noise_free_labels_follow_concept():
    spec = D.SyntheticStreamSpec(3, 300, 4, concept_schedule=((1, 0), (3, 1)), seed=2)
    ds = D.generate_synthetic(spec)
    dirs = D.concept_directions(spec, [0, 1])
    assert abs(dirs[0] @ dirs[1]) < 1e-12
    thr = D.norm.ppf(0.7)
    for k, concept in [(1, 0), (2, 0), (3, 1)]:
        p = ds.period(k)
        assert np.array_equal(p.y, (p.X @ dirs[concept] > thr).astype(np.int8))


def test_synthetic_noise_rate():
    spec = D.SyntheticStreamSpec(2, 20000, 3, noise_rate=0.1, seed=3)
    ds = D.generate_synthetic(spec)
    w = D.concept_directions(spec, [0])[0]
    p = ds.period(1)
    clean = (p.X @ w > D.norm.ppf(0.7)).astype(np.int8)
    assert abs(np.mean(clean != p.y) - 0.1) < 0.01


def test_synthetic_spec_validation_and_round_trip():
    with pytest.raises(D.InvalidSpec):
        D.generate_synthetic(D.SyntheticStreamSpec(3, 10, 2, concept_schedule=((2, 0),)))
    with pytest.raises(D.InvalidSpec):
        D.generate_synthetic(D.SyntheticStreamSpec(3, 10, 2, noise_rate=0.5))
    spec = D.SyntheticStreamSpec(3, 10, 2, concept_schedule=((1, 0), (2, 1)), seed=8)
    assert D.SyntheticStreamSpec.from_dict(spec.to_dict()) == spec
    assert spec.concept_at(1) == 0 and spec.concept_at(3) == 1


def test_synthetic_csv_round_trip(tmp_path):
    ds = D.generate_synthetic(D.SyntheticStreamSpec(3, 40, 2, seed=6))
    samples = D.dataset_to_samples(ds)
    p = tmp_path / "s.csv"
    write_rows(p, [(s.timestamp, repr(s.features[0]), repr(s.features[1]), s.label)
                   for s in samples], header=("t", "f0", "f1", "y"))
    schema = D.DatasetSchema(("f0", "f1"), "y", "1", "t")
    back = D.partition_periods(D.load_csv(p, schema), "day", feature_names=("f0", "f1"))
    assert back.fingerprint() == ds.fingerprint()
