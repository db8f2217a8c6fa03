import numpy as np
import pandas as pd
import pytest

from fairtune.data import (
    PrivilegedPredicate,
    TaskConfig,
    data_root,
    load_csv,
    load_frame,
    load_task,
    make_synthetic_biased,
    split,
    subsample_tuning_batch,
)
from fairtune.errors import ConfigError, DegenerateBatchError, DegenerateSplitError

from conftest import CONFIGS

ADULT_ROWS = [
    # age, workclass, sex, income
    ("39", "State-gov", "Male", "<=50K"),
    ("50", "Self-emp", "Male", ">50K"),
    ("38", "Private", "Female", "<=50K"),
    ("53", "Private", "Female", ">50K"),
    ("28", "Private", "Male", "<=50K"),
    ("37", "?", "Female", ">50K"),
    ("49", "Private", "Female", "<=50K"),
    ("52", "Self-emp", "Male", ">50K."),
]


def adult_config(**kw):
    base = dict(dataset_name="toy-adult", file="toy.csv", label_column="income",
                favorable_value=[">50K", ">50K."], sensitive_column="sex",
                privileged={"op": "eq", "value": "Male"},
                categorical_columns=["workclass"], numeric_columns=["age"],
                split_fractions=[0.5, 0.25, 0.25], split_seed=0)
    base.update(kw)
    return TaskConfig.from_dict(base)


def adult_frame(rows=ADULT_ROWS, repeat=4):
    frame = pd.DataFrame(rows * repeat, columns=["age", "workclass", "sex", "income"])
    return frame


@pytest.mark.parametrize("count,fractions,sizes", [
    (10, (0.6, 0.2, 0.2), (6, 2, 2)),
    (11, (0.6, 0.2, 0.2), (7, 2, 2)),
    (4, (0.5, 0.25, 0.25), (2, 1, 1)),
])
def test_split_sizes(count, fractions, sizes):
    parts = split(count, fractions, seed=3)
    assert tuple(p.size for p in parts) == sizes
    joined = np.concatenate(parts)
    assert sorted(joined) == list(range(count))
    again = split(count, fractions, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip(parts, again))


def test_split_too_small():
    with pytest.raises(DegenerateSplitError):
        split(3, (0.6, 0.2, 0.2))


def test_four_row_toy_csv_partitions(tmp_path):
    # too few rows to cover every (group, label) cell, so only the split is checked
    path = tmp_path / "toy.csv"
    path.write_text("x,label\n1,0\n2,1\n3,0\n4,1\n")
    frame = pd.read_csv(path, dtype=str)
    assert len(frame) == 4
    assert [p.size for p in split(len(frame), (0.5, 0.25, 0.25), 0)] == [2, 1, 1]


def test_adult_format_load(tmp_path):
    path = tmp_path / "toy.csv"
    adult_frame().to_csv(path, index=False)
    ds = load_csv(path, adult_config())
    assert ds.dropped_rows == 4  # the "?" row, repeated four times
    assert len(ds) == 28
    assert ds.feature_names == ("age", "workclass=Private", "workclass=Self-emp",
                                "workclass=State-gov")
    raw = adult_frame()
    raw = raw[raw.workclass != "?"].reset_index(drop=True)
    assert np.array_equal(ds.sensitive, (raw.sex == "Male").to_numpy().astype(int))
    assert np.array_equal(ds.labels, raw.income.str.startswith(">50K").to_numpy().astype(int))
    onehot = ds.features[:, 1:]
    assert np.array_equal(onehot.sum(axis=1), np.ones(len(ds)))


def test_scaling_uses_train_statistics():
    ds = load_frame(adult_frame(), adult_config())
    age = ds.features[:, 0]
    assert age[ds.train_idx].min() == 0.0 and age[ds.train_idx].max() == 1.0
    assert ((age >= 0) & (age <= 1)).all()


def test_out_of_range_values_are_clamped():
    frame = adult_frame()
    frame = frame[frame.workclass != "?"].reset_index(drop=True)
    # the split depends only on the row count, so plant extremes outside train
    ds = load_frame(frame, adult_config())
    frame.loc[ds.test_idx[0], "age"] = "90"
    frame.loc[ds.tune_idx[0], "age"] = "10"
    ds = load_frame(frame, adult_config())
    age = ds.features[:, 0]
    assert age[ds.test_idx[0]] == 1.0 and age[ds.tune_idx[0]] == 0.0
    assert ((ds.features >= 0) & (ds.features <= 1)).all()


def test_missing_column_is_named():
    with pytest.raises(ConfigError, match="hours"):
        load_frame(adult_frame(), adult_config(numeric_columns=["age", "hours"]))


def test_degenerate_split_rejected():
    only_male = [r for r in ADULT_ROWS if r[2] == "Male"] + [("40", "Private", "Female", "<=50K")]
    with pytest.raises(DegenerateSplitError):
        load_frame(adult_frame(only_male), adult_config())


def test_numeric_threshold_predicate():
    pred = PrivilegedPredicate("gt", 25)
    assert list(pred.apply(pd.Series(["20", "25", "26"], name="age"))) == [0, 0, 1]
    with pytest.raises(ConfigError):
        PrivilegedPredicate("approx", 1)


def test_config_validation():
    with pytest.raises(ConfigError):
        adult_config(split_fractions=[0.5, 0.5, 0.5])
    with pytest.raises(ConfigError):
        adult_config(numeric_columns=["age", "sex"])
    with pytest.raises(ConfigError, match="label_column"):
        TaskConfig.from_dict({"dataset_name": "x", "file": "x.csv"})


def test_unreadable_file(tmp_path):
    with pytest.raises(OSError):
        load_csv(tmp_path / "absent.csv", adult_config())


def test_synthetic_generator_properties():
    frame = make_synthetic_biased(2000, seed=0)
    assert len(frame) == 2000
    assert list(frame.columns) == ["skill", "proxy", "group", "label"]
    priv = frame[frame.group == "a"]
    unpriv = frame[frame.group == "b"]
    # near-median skill band
    mid = lambda f: f[(f.skill > 0.4) & (f.skill < 0.6)].label.mean()
    assert mid(priv) == pytest.approx(0.7, abs=0.08)
    assert mid(unpriv) == pytest.approx(0.3, abs=0.08)
    assert make_synthetic_biased(50, seed=1).equals(make_synthetic_biased(50, seed=1))


def test_batch_full_split_and_coverage(synthetic_ds):
    tune = synthetic_ds.tune_idx
    assert np.array_equal(subsample_tuning_batch(synthetic_ds, tune.size, 0), tune)
    rng = np.random.default_rng(7)
    for _ in range(1000):
        idx = subsample_tuning_batch(synthetic_ds, 32, rng)
        assert idx.size == 32 and np.isin(idx, tune).all()
        y, z = synthetic_ds.labels[idx], synthetic_ds.sensitive[idx]
        assert {(a, b) for a, b in zip(z, y)} == {(0, 0), (0, 1), (1, 0), (1, 1)}
    a = subsample_tuning_batch(synthetic_ds, 32, np.random.default_rng(5))
    b = subsample_tuning_batch(synthetic_ds, 32, np.random.default_rng(5))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        subsample_tuning_batch(synthetic_ds, tune.size + 1, 0)


def test_batch_gives_up_on_unlucky_draws(synthetic_ds):
    with pytest.raises(DegenerateBatchError):
        subsample_tuning_batch(synthetic_ds, 2, np.random.default_rng(0), max_retries=3)


def test_shipped_task_configs_parse():
    names = sorted(p.stem for p in (CONFIGS / "tasks").glob("*.yaml"))
    assert names == ["adult_race", "adult_sex", "bank_age", "compas_race", "compas_sex",
                     "german_sex", "synthetic"]
    for name in names:
        TaskConfig.from_yaml(CONFIGS / "tasks" / f"{name}.yaml")


@pytest.mark.skipif(not (data_root() / "german_credit.csv").is_file(),
                    reason="German credit file not present under the data root")
def test_german_row_count():
    ds = load_task(TaskConfig.from_yaml(CONFIGS / "tasks" / "german_sex.yaml"))
    assert len(ds) + ds.dropped_rows == 1000
