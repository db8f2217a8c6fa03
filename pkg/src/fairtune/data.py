"""Tabular dataset ingestion: binarise label/sensitive columns, encode, split.

A task is described by a YAML file (see ``configs/tasks``)::

    dataset_name: german
    file: german_credit.csv        # relative to $FAIRTUNE_DATA_ROOT
    label_column: class
    favorable_value: good          # string or list of strings
    sensitive_column: personal_status
    privileged: {op: in, value: [male single, male mar/wid, male div/sep]}
    categorical_columns: [...]
    numeric_columns: [...]
    split_fractions: [0.6, 0.2, 0.2]
    split_seed: 0

Optional keys: ``delimiter``, ``na_values``, ``sha256``, ``generator`` (name
of a bundled synthetic generator used instead of ``file``), ``generator_args``.
"""
from __future__ import annotations

import hashlib
import logging
import math
import operator
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .errors import ConfigError, DegenerateBatchError, DegenerateSplitError
from .seeding import rng_for

log = logging.getLogger(__name__)

DATA_ROOT_ENV = "FAIRTUNE_DATA_ROOT"

_OPS = {
    "eq": operator.eq, "ne": operator.ne,
    "gt": operator.gt, "ge": operator.ge, "lt": operator.lt, "le": operator.le,
}


@dataclass(frozen=True)
class PrivilegedPredicate:
    """Rule deciding membership of the privileged group (Z=1)."""

    op: str
    value: object

    def __post_init__(self):
        if self.op not in _OPS and self.op != "in":
            raise ConfigError(f"privileged.op must be one of {sorted(_OPS) + ['in']}, got {self.op!r}")

    @property
    def numeric(self) -> bool:
        return self.op in ("gt", "ge", "lt", "le")

    def apply(self, column: pd.Series) -> np.ndarray:
        if self.op == "in":
            values = {str(v) for v in self.value}
            return column.astype(str).isin(values).to_numpy()
        if self.numeric:
            numbers = pd.to_numeric(column, errors="coerce")
            if numbers.isna().any():
                raise ConfigError(f"sensitive column {column.name!r} has non-numeric values")
            return _OPS[self.op](numbers, float(self.value)).to_numpy()
        return _OPS[self.op](column.astype(str), str(self.value)).to_numpy()


@dataclass(frozen=True)
class TaskConfig:
    dataset_name: str
    label_column: str
    favorable_value: tuple[str, ...]
    sensitive_column: str
    privileged: PrivilegedPredicate
    categorical_columns: tuple[str, ...] = ()
    numeric_columns: tuple[str, ...] = ()
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    split_seed: int = 0
    file: str | None = None
    delimiter: str = ","
    na_values: tuple[str, ...] = ("", "?", "NA")
    sha256: str | None = None
    generator: str | None = None
    generator_args: dict = field(default_factory=dict)

    def __post_init__(self):
        fav = self.favorable_value
        fav = (fav,) if isinstance(fav, str) else tuple(str(v) for v in fav)
        object.__setattr__(self, "favorable_value", fav)
        for name in ("categorical_columns", "numeric_columns", "na_values"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        fractions = tuple(float(f) for f in self.split_fractions)
        if len(fractions) != 3 or min(fractions) <= 0 or abs(sum(fractions) - 1.0) > 1e-9:
            raise ConfigError(f"split_fractions must be three positive ratios summing to 1, got {fractions}")
        object.__setattr__(self, "split_fractions", fractions)
        features = self.categorical_columns + self.numeric_columns
        if not features:
            raise ConfigError("at least one feature column is required")
        if len(set(features)) != len(features):
            raise ConfigError("a column is listed more than once among features")
        for special in ("sensitive_column", "label_column"):
            if getattr(self, special) in features:
                raise ConfigError(f"{special} {getattr(self, special)!r} must not be a feature column")
        if self.file is None and self.generator is None:
            raise ConfigError("task config needs either 'file' or 'generator'")

    @property
    def used_columns(self) -> list[str]:
        return [self.label_column, self.sensitive_column,
                *self.categorical_columns, *self.numeric_columns]

    @classmethod
    def from_dict(cls, data: dict) -> "TaskConfig":
        data = dict(data)
        required = ("dataset_name", "label_column", "favorable_value",
                    "sensitive_column", "privileged")
        for key in required:
            if key not in data:
                raise ConfigError(f"task config is missing key {key!r}")
        priv = data.pop("privileged")
        if not isinstance(priv, dict) or "op" not in priv or "value" not in priv:
            raise ConfigError("privileged must be a mapping with 'op' and 'value'")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown task config keys: {sorted(unknown)}")
        return cls(privileged=PrivilegedPredicate(priv["op"], priv["value"]), **data)

    @classmethod
    def from_yaml(cls, path) -> "TaskConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))


@dataclass(frozen=True)
class TaskDataset:
    features: np.ndarray
    labels: np.ndarray
    sensitive: np.ndarray
    train_idx: np.ndarray
    tune_idx: np.ndarray
    test_idx: np.ndarray
    feature_names: tuple[str, ...] = ()
    dropped_rows: int = 0

    def __post_init__(self):
        for name in ("features", "labels", "sensitive", "train_idx", "tune_idx", "test_idx"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.labels.size)

    def part(self, split: str):
        """``(features, labels, sensitive)`` of the train, tune or test split."""
        idx = getattr(self, f"{split}_idx")
        return self.features[idx], self.labels[idx], self.sensitive[idx]


def split(count: int, fractions=(0.6, 0.2, 0.2), seed: int = 0):
    """Shuffle ``range(count)`` and cut it by ``fractions``; remainder goes to train."""
    fractions = tuple(fractions)
    n_tune = math.floor(count * fractions[1] + 1e-9)
    n_test = math.floor(count * fractions[2] + 1e-9)
    n_train = count - n_tune - n_test
    if min(n_train, n_tune, n_test) < 1:
        raise DegenerateSplitError(
            f"splitting {count} rows by {fractions} leaves an empty split "
            f"(sizes {n_train}, {n_tune}, {n_test})")
    order = np.random.default_rng(seed).permutation(count)
    return (np.sort(order[:n_train]), np.sort(order[n_train:n_train + n_tune]),
            np.sort(order[n_train + n_tune:]))


def _missing_cells(labels, sensitive) -> list[str]:
    missing = []
    for z in (0, 1):
        for y in (0, 1):
            if not np.any((sensitive == z) & (labels == y)):
                missing.append(f"Z={z},Y={y}")
    return missing


def load_frame(frame: pd.DataFrame, config: TaskConfig) -> TaskDataset:
    """Build a :class:`TaskDataset` from an all-string DataFrame."""
    for col in config.used_columns:
        if col not in frame.columns:
            raise ConfigError(f"column {col!r} not found in dataset {config.dataset_name!r}")
    frame = frame[config.used_columns].copy()
    for col in frame.columns:
        frame[col] = frame[col].astype(str).str.strip()
    missing = frame.isin(set(config.na_values)).any(axis=1)
    dropped = int(missing.sum())
    if dropped:
        log.info("%s: dropped %d rows with missing values", config.dataset_name, dropped)
    frame = frame.loc[~missing].reset_index(drop=True)

    numeric = {}
    for col in config.numeric_columns:
        values = pd.to_numeric(frame[col], errors="coerce")
        if values.isna().any():
            bad = frame[col][values.isna()].iloc[0]
            raise ConfigError(f"numeric column {col!r} has unparseable value {bad!r}")
        numeric[col] = values.to_numpy(dtype=float)

    labels = frame[config.label_column].isin(set(config.favorable_value)).to_numpy().astype(np.int8)
    sensitive = config.privileged.apply(frame[config.sensitive_column]).astype(np.int8)

    train_idx, tune_idx, test_idx = split(len(frame), config.split_fractions, config.split_seed)
    for name, idx in (("train", train_idx), ("tune", tune_idx), ("test", test_idx)):
        gaps = _missing_cells(labels[idx], sensitive[idx])
        if gaps:
            raise DegenerateSplitError(f"{name} split has no rows in cells {gaps}")

    columns, names = [], []
    for col in config.numeric_columns:
        values = numeric[col]
        lo, hi = values[train_idx].min(), values[train_idx].max()
        scaled = (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)
        columns.append(np.clip(scaled, 0.0, 1.0))
        names.append(col)
    for col in config.categorical_columns:
        for level in sorted(frame[col].unique()):
            columns.append((frame[col] == level).to_numpy(dtype=float))
            names.append(f"{col}={level}")
    features = np.column_stack(columns)

    return TaskDataset(features, labels, sensitive, train_idx, tune_idx, test_idx,
                       tuple(names), dropped)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_csv(path, config: TaskConfig) -> TaskDataset:
    path = Path(path)
    if not path.is_file():
        raise OSError(f"cannot read dataset file {str(path)!r}")
    if config.sha256 and _sha256(path) != config.sha256.lower():
        raise ConfigError(f"checksum mismatch for {str(path)!r}")
    frame = pd.read_csv(path, sep=config.delimiter, dtype=str, keep_default_na=False,
                        skipinitialspace=True)
    return load_frame(frame, config)


def data_root() -> Path:
    return Path(os.environ.get(DATA_ROOT_ENV, "data"))


def load_task(config: TaskConfig, root=None) -> TaskDataset:
    """Load a task from its generator or from ``file`` under the data root."""
    if config.generator is not None:
        if config.generator != "synthetic_biased":
            raise ConfigError(f"unknown generator {config.generator!r}")
        return load_frame(make_synthetic_biased(**config.generator_args).astype(str), config)
    root = Path(root) if root is not None else data_root()
    return load_csv(root / config.file, config)


def subsample_tuning_batch(dataset: TaskDataset, batch_size: int, rng,
                           max_retries: int = 100) -> np.ndarray:
    """Uniform subset of the tune split covering every (group, label) cell."""
    tune = dataset.tune_idx
    if batch_size > tune.size:
        raise ValueError(f"batch_size {batch_size} exceeds tune split size {tune.size}")
    if batch_size == tune.size:
        return tune
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    for _ in range(max_retries):
        idx = np.sort(rng.choice(tune, size=batch_size, replace=False))
        if not _missing_cells(dataset.labels[idx], dataset.sensitive[idx]):
            return idx
    raise DegenerateBatchError(
        f"no batch of size {batch_size} covered all groups and labels after {max_retries} draws")


def make_synthetic_biased(n_rows: int = 2000, seed: int = 0) -> pd.DataFrame:
    """Two features plus a binary group, with group-dependent label rates.

    ``skill`` is a qualification score independent of group; ``proxy`` leaks
    group membership. At median qualification the favorable-label rate is 0.7
    for the privileged group and 0.3 for the unprivileged one.
    """
    rng = rng_for(seed, "synthetic")
    group = rng.integers(0, 2, n_rows)
    skill = rng.uniform(0.0, 1.0, n_rows)
    proxy = np.clip(rng.normal(0.35 + 0.3 * group, 0.15), 0.0, 1.0)
    base_logit = np.where(group == 1, np.log(0.7 / 0.3), np.log(0.3 / 0.7))
    p = 1.0 / (1.0 + np.exp(-(6.0 * (skill - 0.5) + base_logit)))
    label = (rng.uniform(size=n_rows) < p).astype(int)
    return pd.DataFrame({
        "skill": np.round(skill, 6),
        "proxy": np.round(proxy, 6),
        "group": np.where(group == 1, "a", "b"),
        "label": label,
    })
