import numpy as np
import pytest

from fairtune import bench as B
from fairtune.bench import BaselineCurve, Region
from fairtune.metrics import PredictionBundle


def model_bundle(n=400, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.integers(0, 2, n)
    y = (rng.uniform(size=n) < np.where(z == 1, 0.6, 0.35)).astype(int)
    scores = np.clip(0.5 * y + 0.3 * z + rng.normal(0, 0.25, n), 0, 1)
    return PredictionBundle(y, (scores >= 0.5).astype(int), scores, z)


def curve(points, anchor=(0.8, 0.6)):
    return BaselineCurve(("ACC", "SPD"), anchor, tuple(points))


def test_pairs_cover_fifteen_combinations():
    assert len(B.PAIRS) == 15
    assert B.pair_name(("AUC", "SPD")) == "AUC_SPD"


def test_degree_zero_is_anchor_and_full_mutation_is_parity():
    b = model_bundle()
    curves = B.build_baselines(b, repetitions=5, seed=1)
    for pair, c in curves.items():
        assert c.points[0] == c.anchor == B.point(b, pair)
        assert len(c.points) == 11
    last = B.processed_scores(B.mutate(b, 1.0, np.random.default_rng(0)), ["SPD", "DI"])
    assert last == {"SPD": 1.0, "DI": 1.0}
    for u in ("ACC", "F1", "AUC"):
        assert curves[(u, "SPD")].points[-1][1] == 1.0
        assert curves[(u, "DI")].points[-1][1] == 1.0


def test_baseline_deterministic():
    b = model_bundle(seed=3)
    assert B.build_baseline(b, ("F1", "EOD"), 4, seed=2) == B.build_baseline(b, ("F1", "EOD"), 4, seed=2)


def test_mutation_degrades_accuracy_on_average():
    c = B.build_baseline(model_bundle(), ("ACC", "SPD"), repetitions=10)
    u = [p[0] for p in c.points]
    assert u[-1] < u[0]


def test_classify_examples():
    c = curve([(0.8, 0.6), (0.7, 0.8)])
    assert B.classify((0.85, 0.7), c) is Region.WIN_WIN
    assert B.classify((0.85, 0.5), c) is Region.INVERTED
    assert c.fairness_at(0.75) == pytest.approx(0.7)
    assert B.classify((0.75, 0.65), c) is Region.BAD
    assert B.classify((0.75, 0.75), c) is Region.GOOD
    assert B.classify((0.75, 0.55), c) is Region.LOSE_LOSE


def test_tie_policy():
    c = curve([(0.8, 0.6), (0.7, 0.8)])
    assert B.classify((0.8, 0.6), c) is Region.BAD
    assert B.classify((0.8 + 1e-13, 0.6 - 1e-13), c) is Region.BAD
    assert B.classify((0.9, 0.6), c) is Region.INVERTED
    assert B.classify((0.7, 0.6), c) is Region.LOSE_LOSE


def test_classification_ignores_curve_point_order():
    rng = np.random.default_rng(0)
    pts = [(0.8, 0.6), (0.75, 0.66), (0.7, 0.8), (0.6, 0.85), (0.5, 1.0)]
    queries = rng.uniform(0.4, 1.0, (300, 2))
    base = [B.classify(q, curve(pts)) for q in queries]
    for _ in range(5):
        shuffled = [pts[i] for i in rng.permutation(len(pts))]
        assert [B.classify(q, curve(shuffled)) for q in queries] == base


def test_worked_proportions():
    labels = [Region.WIN_WIN] * 75 + [Region.GOOD] * 15 + [Region.BAD] * 60
    props = B.proportions(labels)
    assert props[Region.WIN_WIN] == 0.5 and props[Region.GOOD] == 0.1
    assert sum(props.values()) == pytest.approx(1.0)


def test_aggregate_means_over_pairs():
    table = B.aggregate({("ACC", "SPD"): [Region.WIN_WIN], ("AUC", "DI"): [Region.BAD]})
    assert table[("ACC", "SPD")][Region.WIN_WIN] == 1.0
    assert table["mean"][Region.WIN_WIN] == 0.5 and table["mean"][Region.BAD] == 0.5
    with pytest.raises(ValueError):
        B.aggregate({})


def test_identical_models_all_on_tie_label():
    b = model_bundle()
    curves = B.build_baselines(b, repetitions=2)
    labels = {pair: [B.classify(B.point(b, pair), c)] * 3 for pair, c in curves.items()}
    assert B.aggregate(labels)["mean"][Region.BAD] == 1.0
