"""Experiment spec files (YAML) tying a task, model and settings together.

Example::

    name: german-sex-lr
    task: ../tasks/german_sex.yaml       # relative to this file
    model: LR
    train_presets: ../presets/train.yaml
    train: {epochs: 300}                 # overrides the preset
    measurement: {fairness: [MA, MB], utility: [AUC], lambda: 0.5}
    mitigation: {episodes: 40, max_steps: 25}
    bench: {repetitions: 50, seed: 0}
    repeat_seeds: [0, 1, 2]
    output_dir: ../../runs/german-sex-lr
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .classifiers import KINDS, TrainSettings
from .data import TaskConfig
from .errors import ConfigError
from .measurement import MeasurementConfig
from .mitigator import MitigationSettings

DEFAULT_MEASUREMENT = MeasurementConfig(("MA", "MB"), ("AUC",), 0.5)


@dataclass(frozen=True)
class BenchSettings:
    repetitions: int = 50
    seed: int = 0


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    task: TaskConfig
    model: str
    train: TrainSettings
    measurement: MeasurementConfig
    mitigation: MitigationSettings
    repeat_seeds: tuple[int, ...]
    output_dir: Path
    bench: BenchSettings = field(default_factory=BenchSettings)
    task_path: Path | None = None

    @property
    def method(self) -> str:
        return self.measurement.label

    @property
    def is_default_reward(self) -> bool:
        return (set(self.measurement.fairness_metrics) == {"MA", "MB"}
                and set(self.measurement.utility_metrics) == {"AUC"})

    def with_overrides(self, *, seeds=None, task_path=None, model=None, out=None):
        spec = self
        if seeds is not None:
            spec = replace(spec, repeat_seeds=_check_seeds(seeds))
        if task_path is not None:
            spec = replace(spec, task=_load_task(Path(task_path)), task_path=Path(task_path))
        if model is not None:
            spec = replace(spec, model=_check_model(model))
        if out is not None:
            spec = replace(spec, output_dir=Path(out))
        return spec


def _check_seeds(seeds) -> tuple[int, ...]:
    try:
        seeds = tuple(int(s) for s in seeds)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"repeat_seeds: expected a list of integers ({exc})") from None
    if not seeds:
        raise ConfigError("repeat_seeds: at least one seed is required")
    return seeds


def _check_model(model) -> str:
    if model not in KINDS:
        raise ConfigError(f"model: expected one of {KINDS}, got {model!r}")
    return model


def _load_task(path: Path) -> TaskConfig:
    if not path.is_file():
        raise ConfigError(f"task: config file {str(path)!r} not found")
    try:
        return TaskConfig.from_yaml(path)
    except ConfigError as exc:
        raise ConfigError(f"task ({path.name}): {exc}") from None


def _build(cls, section: str, values: dict):
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError(f"{section}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def measurement_from_dict(values: dict | None) -> MeasurementConfig:
    if not values:
        return DEFAULT_MEASUREMENT
    unknown = set(values) - {"fairness", "utility", "lambda"}
    if unknown:
        raise ConfigError(f"measurement: unknown keys {sorted(unknown)}")
    try:
        return MeasurementConfig(tuple(values.get("fairness", ("MA", "MB"))),
                                 tuple(values.get("utility", ("AUC",))),
                                 float(values.get("lambda", 0.5)))
    except ConfigError as exc:
        raise ConfigError(f"measurement: {exc}") from None


def _train_settings(model: str, dataset: str, presets_path: Path | None, override) -> TrainSettings:
    merged = {}
    if presets_path is not None:
        if not presets_path.is_file():
            raise ConfigError(f"train_presets: file {str(presets_path)!r} not found")
        presets = yaml.safe_load(presets_path.read_text()) or {}
        merged.update((presets.get("default") or {}).get(model) or {})
        merged.update((presets.get(dataset) or {}).get(model) or {})
    merged.update(override or {})
    return _build(TrainSettings, "train", merged)


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"spec: file {str(path)!r} not found")
    raw = yaml.safe_load(path.read_text()) or {}
    if not isinstance(raw, dict):
        raise ConfigError("spec: expected a mapping at top level")
    allowed = {"name", "task", "model", "train_presets", "train", "measurement",
               "mitigation", "bench", "repeat_seeds", "output_dir"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"spec: unknown keys {sorted(unknown)}")
    base = path.parent
    if "task" not in raw:
        raise ConfigError("task: key is required")
    task_path = base / raw["task"]
    task = _load_task(task_path)
    model = _check_model(raw.get("model", "LR"))
    presets = base / raw["train_presets"] if raw.get("train_presets") else None
    return ExperimentSpec(
        name=str(raw.get("name", path.stem)),
        task=task,
        model=model,
        train=_train_settings(model, task.dataset_name, presets, raw.get("train")),
        measurement=measurement_from_dict(raw.get("measurement")),
        mitigation=_build(MitigationSettings, "mitigation", raw.get("mitigation")),
        repeat_seeds=_check_seeds(raw.get("repeat_seeds", ())),
        output_dir=base / raw.get("output_dir", f"runs/{path.stem}"),
        bench=_build(BenchSettings, "bench", raw.get("bench")),
        task_path=task_path,
    )
