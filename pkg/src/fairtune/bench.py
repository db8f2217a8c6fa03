"""Mutation-baseline trade-off benchmark.

The original model's predictions are progressively overwritten with its
majority predicted class (0%, 10%, ..., 100% of rows). The resulting
(utility, fairness) curve is the baseline against which each mitigated model
is labelled win-win, good, inverted, bad or lose-lose, separately for every
(utility metric, fairness metric) pair. All coordinates are standardised
scores, so higher is better on both axes.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .measurement import REGISTRY, standardize
from .metrics import PredictionBundle, raw_metrics
from .seeding import rng_for

log = logging.getLogger(__name__)

BENCH_UTILITY = ("ACC", "F1", "AUC")
BENCH_FAIRNESS = ("DI", "SPD", "EOD", "AOD", "ERD")
PAIRS = tuple((u, f) for u in BENCH_UTILITY for f in BENCH_FAIRNESS)
DEGREES = tuple(k / 10 for k in range(11))
TIE_TOL = 1e-12


class Region(str, Enum):
    WIN_WIN = "win-win"
    GOOD = "good"
    INVERTED = "inverted"
    BAD = "bad"
    LOSE_LOSE = "lose-lose"


def pair_name(pair) -> str:
    return f"{pair[0]}_{pair[1]}"


@dataclass(frozen=True)
class BaselineCurve:
    pair: tuple[str, str]
    anchor: tuple[float, float]
    points: tuple[tuple[float, float], ...]  # (u, f) per degree, degree order
    degrees: tuple[float, ...] = DEGREES

    def sorted_points(self) -> np.ndarray:
        pts = np.array(self.points, dtype=float)
        return pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def fairness_at(self, u: float) -> float:
        """Piecewise-linear baseline fairness at utility ``u``, clamped at the ends."""
        pts = self.sorted_points()
        return float(np.interp(u, pts[:, 0], pts[:, 1]))


def processed_scores(bundle: PredictionBundle, names) -> dict[str, float]:
    raw = raw_metrics(bundle, names)
    return {n: standardize(raw[n], REGISTRY[n]).value for n in names}


def _names(pairs) -> list[str]:
    return sorted({n for pair in pairs for n in pair})


def point(bundle: PredictionBundle, pair) -> tuple[float, float]:
    s = processed_scores(bundle, list(pair))
    return (s[pair[0]], s[pair[1]])


def mutate(original: PredictionBundle, fraction: float, rng: np.random.Generator) -> PredictionBundle:
    """Overwrite a random ``fraction`` of predictions with the majority predicted class.

    Mutated rows also get the extreme score on that class's side, so that
    ranking metrics degrade consistently with the labels.
    """
    preds = original.predicted_labels
    majority = 1 if 2 * int(preds.sum()) >= preds.size else 0
    n_mut = int(round(fraction * preds.size))
    idx = rng.choice(preds.size, size=n_mut, replace=False)
    new_preds = preds.copy()
    new_scores = original.scores.copy()
    new_preds[idx] = majority
    new_scores[idx] = original.scores.max() if majority else original.scores.min()
    return PredictionBundle(original.labels, new_preds, new_scores, original.sensitive)


def build_baselines(original: PredictionBundle, pairs=PAIRS, repetitions: int = 50,
                    seed: int = 0) -> dict[tuple[str, str], BaselineCurve]:
    """Baseline curves for several metric pairs from one shared set of mutations."""
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    pairs = [tuple(p) for p in pairs]
    names = _names(pairs)
    anchor = processed_scores(original, names)
    rng = rng_for(seed, "mutation")
    per_degree = [anchor]
    for degree in DEGREES[1:]:
        acc = dict.fromkeys(names, 0.0)
        for _ in range(repetitions):
            scores = processed_scores(mutate(original, degree, rng), names)
            for n in names:
                acc[n] += scores[n]
        per_degree.append({n: acc[n] / repetitions for n in names})
    return {
        pair: BaselineCurve(pair, (anchor[pair[0]], anchor[pair[1]]),
                            tuple((d[pair[0]], d[pair[1]]) for d in per_degree))
        for pair in pairs
    }


def build_baseline(original: PredictionBundle, pair, repetitions: int = 50,
                   seed: int = 0) -> BaselineCurve:
    return build_baselines(original, [pair], repetitions, seed)[tuple(pair)]


def classify(pt, curve: BaselineCurve) -> Region:
    """Region of ``pt = (u, f)`` relative to ``curve``.

    A coordinate within ``TIE_TOL`` of the anchor counts as not better. A point
    equal to the anchor on both axes is labelled bad.
    """
    u, f = pt
    u0, f0 = curve.anchor
    u_better, f_better = u > u0 + TIE_TOL, f > f0 + TIE_TOL
    if abs(u - u0) <= TIE_TOL and abs(f - f0) <= TIE_TOL:
        log.debug("point %s ties the anchor; labelled bad", pt)
        return Region.BAD
    if u_better and f_better:
        return Region.WIN_WIN
    if u_better:
        return Region.INVERTED
    if f_better:
        return Region.GOOD if f > curve.fairness_at(u) else Region.BAD
    return Region.LOSE_LOSE


def proportions(labels) -> dict[Region, float]:
    labels = list(labels)
    if not labels:
        raise ValueError("no labels to aggregate")
    counts = Counter(Region(lab) for lab in labels)
    return {r: counts.get(r, 0) / len(labels) for r in Region}


def aggregate(labels_by_pair) -> dict:
    """Per-pair region proportions and their mean over pairs (key ``"mean"``)."""
    if not labels_by_pair:
        raise ValueError("no labels to aggregate")
    table = {pair: proportions(labs) for pair, labs in labels_by_pair.items()}
    table["mean"] = {r: float(np.mean([table[p][r] for p in labels_by_pair])) for r in Region}
    return table
