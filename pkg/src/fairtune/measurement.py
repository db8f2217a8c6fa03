"""Standardise heterogeneous metrics onto a common higher-is-better [0, 1] scale.

Each metric is described by a :class:`MetricSpec` giving its direction and
bounds. Standardised fairness scores are averaged into ``f_bar`` and utility
scores into ``u_bar``; the reward blends the two with weight ``lam``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType

from .errors import ConfigError, OutOfRangeError
from .metrics import PredictionBundle, raw_metrics

CLAMP_TOL = 1e-9


class Monotonicity(str, Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    NON_MONOTONIC = "non-monotonic"


@dataclass(frozen=True)
class MetricSpec:
    name: str
    kind: str  # "fairness" | "utility"
    monotonicity: Monotonicity
    min: float
    max: float
    ideal: float | None = None

    def __post_init__(self):
        if self.kind not in ("fairness", "utility"):
            raise ConfigError(f"{self.name}: kind must be fairness or utility")
        if not self.min < self.max:
            raise ConfigError(f"{self.name}: min must be below max")
        if self.monotonicity is Monotonicity.NON_MONOTONIC:
            if self.ideal is None or not self.min < self.ideal < self.max:
                raise ConfigError(f"{self.name}: ideal point must lie strictly inside bounds")

    @property
    def symmetric(self) -> bool:
        return (self.monotonicity is Monotonicity.NON_MONOTONIC
                and self.ideal == 0.5 * (self.min + self.max))


@dataclass(frozen=True)
class ProcessedScore:
    name: str
    value: float


_INC, _DEC, _NON = Monotonicity.INCREASING, Monotonicity.DECREASING, Monotonicity.NON_MONOTONIC

REGISTRY = MappingProxyType({
    "DI": MetricSpec("DI", "fairness", _INC, 0.0, 1.0),
    "SPD": MetricSpec("SPD", "fairness", _DEC, 0.0, 1.0),
    "EOD": MetricSpec("EOD", "fairness", _NON, -1.0, 1.0, 0.0),
    "AOD": MetricSpec("AOD", "fairness", _NON, -1.0, 1.0, 0.0),
    "ERD": MetricSpec("ERD", "fairness", _NON, -2.0, 2.0, 0.0),
    "MA": MetricSpec("MA", "fairness", _INC, 0.0, 1.0),
    "MB": MetricSpec("MB", "fairness", _INC, 0.0, 1.0),
    "ACC": MetricSpec("ACC", "utility", _INC, 0.0, 1.0),
    "F1": MetricSpec("F1", "utility", _INC, 0.0, 1.0),
    "AUC": MetricSpec("AUC", "utility", _INC, 0.0, 1.0),
})

FAIRNESS_METRICS = tuple(k for k, s in REGISTRY.items() if s.kind == "fairness")
UTILITY_METRICS = tuple(k for k, s in REGISTRY.items() if s.kind == "utility")


def standardize(raw: float, spec: MetricSpec) -> ProcessedScore:
    lo, hi = spec.min, spec.max
    if raw < lo - CLAMP_TOL or raw > hi + CLAMP_TOL:
        raise OutOfRangeError(f"{spec.name}={raw!r} outside [{lo}, {hi}]")
    x = min(max(raw, lo), hi)
    if spec.monotonicity is Monotonicity.INCREASING:
        value = (x - lo) / (hi - lo)
    elif spec.monotonicity is Monotonicity.DECREASING:
        value = 1.0 - (x - lo) / (hi - lo)
    elif spec.symmetric:
        value = 1.0 - 2.0 * abs(x - spec.ideal) / (hi - lo)
    elif x <= spec.ideal:
        value = (x - lo) / (spec.ideal - lo)
    else:
        value = (x - hi) / (spec.ideal - hi)
    return ProcessedScore(spec.name, value)


def comprehensive(scores) -> float:
    scores = list(scores)
    if not scores:
        raise ConfigError("cannot aggregate an empty list of scores")
    return sum(s.value for s in scores) / len(scores)


def reward(f_bar: float, u_bar: float, lam: float) -> float:
    for name, v in (("f_bar", f_bar), ("u_bar", u_bar), ("lambda", lam)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return lam * f_bar + (1.0 - lam) * u_bar


@dataclass(frozen=True)
class MeasurementConfig:
    fairness_metrics: tuple[str, ...] = ("MA", "MB")
    utility_metrics: tuple[str, ...] = ("AUC",)
    lam: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "fairness_metrics", tuple(self.fairness_metrics))
        object.__setattr__(self, "utility_metrics", tuple(self.utility_metrics))
        if not self.fairness_metrics or not self.utility_metrics:
            raise ConfigError("measurement needs at least one fairness and one utility metric")
        for names, kind in ((self.fairness_metrics, "fairness"), (self.utility_metrics, "utility")):
            for name in names:
                if name not in REGISTRY:
                    raise ConfigError(f"unknown metric {name!r}")
                if REGISTRY[name].kind != kind:
                    raise ConfigError(f"metric {name!r} is not a {kind} metric")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")

    @property
    def label(self) -> str:
        return "+".join(self.fairness_metrics + self.utility_metrics)


@dataclass(frozen=True)
class Measurement:
    f_bar: float
    u_bar: float
    reward: float
    processed: dict


def measure(bundle: PredictionBundle, config: MeasurementConfig) -> Measurement:
    """Evaluate ``f_bar``, ``u_bar`` and the reward of one prediction bundle."""
    names = config.fairness_metrics + config.utility_metrics
    raw = raw_metrics(bundle, names)
    processed = {n: standardize(raw[n], REGISTRY[n]) for n in names}
    f_bar = comprehensive(processed[n] for n in config.fairness_metrics)
    u_bar = comprehensive(processed[n] for n in config.utility_metrics)
    return Measurement(f_bar, u_bar, reward(f_bar, u_bar, config.lam),
                       {n: s.value for n, s in processed.items()})
