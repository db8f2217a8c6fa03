import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairtune.errors import ConfigError, OutOfRangeError
from fairtune.metrics import PredictionBundle
from fairtune.measurement import (
    REGISTRY,
    MeasurementConfig,
    MetricSpec,
    Monotonicity,
    ProcessedScore,
    comprehensive,
    measure,
    reward,
    standardize,
)

unit = st.floats(0, 1)


def std(name, raw):
    return standardize(raw, REGISTRY[name]).value


def test_worked_examples():
    assert std("SPD", 0.3) == pytest.approx(0.7, abs=1e-15)
    assert std("EOD", -0.2) == pytest.approx(0.8, abs=1e-15)
    assert std("ERD", 0.6) == pytest.approx(0.7, abs=1e-15)
    skew = MetricSpec("X", "fairness", Monotonicity.NON_MONOTONIC, 0.0, 1.0, 0.25)
    assert not skew.symmetric
    assert standardize(0.5, skew).value == pytest.approx(2 / 3, abs=1e-15)
    assert standardize(0.125, skew).value == pytest.approx(0.5, abs=1e-15)


def test_symmetric_branch_agrees_with_piecewise():
    spec = REGISTRY["ERD"]
    for x in np.linspace(-2, 2, 41):
        piece = (x + 2) / 2 if x <= 0 else (x - 2) / (0 - 2)
        assert std("ERD", x) == pytest.approx(piece, abs=1e-15)
    assert spec.symmetric


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_endpoints_and_sweep(name):
    spec = REGISTRY[name]
    lo, hi = std(name, spec.min), std(name, spec.max)
    xs = np.linspace(spec.min, spec.max, 1000)
    vals = np.array([std(name, x) for x in xs])
    assert ((vals >= 0) & (vals <= 1)).all()
    diffs = np.diff(vals)
    if spec.monotonicity is Monotonicity.INCREASING:
        assert (lo, hi) == (0.0, 1.0)
        assert (diffs > 0).all()
    elif spec.monotonicity is Monotonicity.DECREASING:
        assert (lo, hi) == (1.0, 0.0)
        assert (diffs < 0).all()
    else:
        assert (lo, hi) == (0.0, 0.0)
        assert std(name, spec.ideal) == 1.0
        below = xs[1:] <= spec.ideal
        assert (diffs[below] > 0).all() and (diffs[~below] < 0).all()


def test_out_of_range_clamped_or_rejected():
    assert std("ACC", 1 + 1e-10) == 1.0
    assert std("ACC", -1e-10) == 0.0
    with pytest.raises(OutOfRangeError, match="EOD"):
        std("EOD", 1.01)


def test_comprehensive():
    assert comprehensive([ProcessedScore("a", 0.8), ProcessedScore("b", 1.0)]) == pytest.approx(0.9)
    assert comprehensive([ProcessedScore("a", 0.7)]) == 0.7
    with pytest.raises(ConfigError):
        comprehensive([])
    # EOD', AOD', ERD' for deltas (a, b) = (-0.2, 0.2)
    a, b = -0.2, 0.2
    scores = [standardize(-b, REGISTRY["EOD"]), standardize((a - b) / 2, REGISTRY["AOD"]),
              standardize(a + b, REGISTRY["ERD"])]
    assert [s.value for s in scores] == pytest.approx([0.8, 0.8, 1.0], abs=1e-15)
    assert comprehensive(scores) == pytest.approx(0.8667, abs=1e-4)


def test_reward_examples():
    assert reward(0.8, 0.6, 0.5) == pytest.approx(0.7)
    assert reward(0.8, 0.6, 0.0) == 0.6
    assert reward(0.8, 0.6, 1.0) == 0.8
    with pytest.raises(ValueError):
        reward(1.2, 0.5, 0.5)


@given(unit, unit, unit, unit)
def test_reward_affine_in_lambda(f, u, l1, l2):
    r1, r2 = reward(f, u, l1), reward(f, u, l2)
    assert 0 <= r1 <= 1
    assert r1 - r2 == pytest.approx((l1 - l2) * (f - u), abs=1e-12)


def test_default_measure_on_canonical_bundle(canonical_bundle):
    b = canonical_bundle
    # positives score 1, half the negatives tie them: AUC = 1 - 0.5 * 0.5
    neg = np.flatnonzero(b.labels == 0)
    scores = b.labels.astype(float)
    scores[neg[::2]] = 1.0
    bundle = PredictionBundle(b.labels, b.predicted_labels, scores, b.sensitive)
    m = measure(bundle, MeasurementConfig())
    assert m.processed["AUC"] == 0.75
    assert m.f_bar == pytest.approx(0.8, abs=1e-15)
    assert m.reward == pytest.approx(0.775, abs=1e-15)


def test_config_validation():
    with pytest.raises(ConfigError):
        MeasurementConfig((), ("AUC",))
    with pytest.raises(ConfigError):
        MeasurementConfig(("AUC",), ("ACC",))
    with pytest.raises(ConfigError):
        MeasurementConfig(("MA",), ("AUC",), lam=1.5)
    with pytest.raises(ConfigError):
        MeasurementConfig(("XYZ",), ("AUC",))
    assert MeasurementConfig().label == "MA+MB+AUC"
