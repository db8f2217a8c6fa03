"""Group fairness and utility metrics for binary classifiers.

Conventions: label ``1`` is the favorable outcome and sensitive value ``1``
marks the privileged group. Subgroup rates follow the usual confusion-matrix
definitions, e.g. ``fpr_u = P[Yhat=1 | Y=0, Z=0]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateGroupError, UndefinedMetricError

__all__ = [
    "PredictionBundle",
    "GroupRates",
    "RateDeltas",
    "group_rates",
    "rate_deltas",
    "di",
    "spd",
    "eod",
    "aod",
    "erd",
    "m_a",
    "m_b",
    "accuracy",
    "f1",
    "auc",
    "auc_pairwise",
    "raw_metrics",
]


def _as_binary(x, name: str) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values")
    return arr.astype(np.int8)


@dataclass(frozen=True)
class PredictionBundle:
    labels: np.ndarray
    predicted_labels: np.ndarray
    scores: np.ndarray
    sensitive: np.ndarray

    def __post_init__(self):
        labels = _as_binary(self.labels, "labels")
        preds = _as_binary(self.predicted_labels, "predicted_labels")
        sens = _as_binary(self.sensitive, "sensitive")
        scores = np.asarray(self.scores, dtype=float)
        n = labels.size
        if n < 1:
            raise ValueError("bundle must be nonempty")
        if not (preds.size == sens.size == scores.size == n):
            raise ValueError("bundle vectors must share one length")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "predicted_labels", preds)
        object.__setattr__(self, "sensitive", sens)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return int(self.labels.size)


@dataclass(frozen=True)
class GroupRates:
    """Per-group confusion rates. ``None`` marks a rate with a zero denominator."""

    tpr_u: float | None
    fpr_u: float | None
    fnr_u: float | None
    tpr_p: float | None
    fpr_p: float | None
    fnr_p: float | None
    sel_u: float
    sel_p: float
    counts: dict = field(default_factory=dict)

    def get(self, name: str, metric: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise UndefinedMetricError(metric, f"{name} has a zero denominator")
        return value


@dataclass(frozen=True)
class RateDeltas:
    a: float  # fpr_u - fpr_p
    b: float  # fnr_u - fnr_p
    c: float  # tpr_u - tpr_p


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def group_rates(bundle: PredictionBundle) -> GroupRates:
    y, yhat, z = bundle.labels, bundle.predicted_labels, bundle.sensitive
    counts = {}
    rates = {}
    for g, suffix in ((0, "u"), (1, "p")):
        in_g = z == g
        if not in_g.any():
            raise DegenerateGroupError(f"no members with sensitive={g}")
        tp = int(np.sum(in_g & (y == 1) & (yhat == 1)))
        fn = int(np.sum(in_g & (y == 1) & (yhat == 0)))
        fp = int(np.sum(in_g & (y == 0) & (yhat == 1)))
        tn = int(np.sum(in_g & (y == 0) & (yhat == 0)))
        counts.update({f"tp_{suffix}": tp, f"fn_{suffix}": fn,
                       f"fp_{suffix}": fp, f"tn_{suffix}": tn})
        rates[f"tpr_{suffix}"] = _ratio(tp, tp + fn)
        rates[f"fnr_{suffix}"] = _ratio(fn, tp + fn)
        rates[f"fpr_{suffix}"] = _ratio(fp, fp + tn)
        rates[f"sel_{suffix}"] = (tp + fp) / (tp + fn + fp + tn)
    return GroupRates(counts=counts, **rates)


def rate_deltas(rates: GroupRates) -> RateDeltas:
    """Group differences in FPR, FNR and TPR.

    With cell counts available the differences are formed exactly and rounded
    once, so ``b == -c`` holds bit for bit.
    """
    cnt = rates.counts
    if cnt:
        pos_u, pos_p = cnt["tp_u"] + cnt["fn_u"], cnt["tp_p"] + cnt["fn_p"]
        neg_u, neg_p = cnt["fp_u"] + cnt["tn_u"], cnt["fp_p"] + cnt["tn_p"]
        if pos_u and pos_p and neg_u and neg_p:
            return RateDeltas(
                a=float(Fraction(cnt["fp_u"], neg_u) - Fraction(cnt["fp_p"], neg_p)),
                b=float(Fraction(cnt["fn_u"], pos_u) - Fraction(cnt["fn_p"], pos_p)),
                c=float(Fraction(cnt["tp_u"], pos_u) - Fraction(cnt["tp_p"], pos_p)),
            )
    return RateDeltas(
        a=rates.get("fpr_u", "a") - rates.get("fpr_p", "a"),
        b=rates.get("fnr_u", "b") - rates.get("fnr_p", "b"),
        c=rates.get("tpr_u", "c") - rates.get("tpr_p", "c"),
    )


def di(rates: GroupRates) -> float:
    """Disparate impact as the smaller of the two selection-rate ratios.

    Both rates zero gives 1 (parity holds trivially); exactly one zero gives 0.
    """
    su, sp = rates.sel_u, rates.sel_p
    if su == 0 and sp == 0:
        return 1.0
    if su == 0 or sp == 0:
        return 0.0
    return min(su / sp, sp / su)


def spd(rates: GroupRates) -> float:
    return abs(rates.sel_u - rates.sel_p)


def eod(rates: GroupRates) -> float:
    return rates.get("tpr_u", "EOD") - rates.get("tpr_p", "EOD")


def aod(rates: GroupRates) -> float:
    fpr_diff = rates.get("fpr_u", "AOD") - rates.get("fpr_p", "AOD")
    tpr_diff = rates.get("tpr_u", "AOD") - rates.get("tpr_p", "AOD")
    return 0.5 * (fpr_diff + tpr_diff)


def erd(rates: GroupRates) -> float:
    err_u = rates.get("fpr_u", "ERD") + rates.get("fnr_u", "ERD")
    err_p = rates.get("fpr_p", "ERD") + rates.get("fnr_p", "ERD")
    return err_u - err_p


def m_a(rates: GroupRates) -> float:
    """False-positive-rate balance, ``1 - |fpr_u - fpr_p|``."""
    return 1.0 - abs(rates.get("fpr_u", "MA") - rates.get("fpr_p", "MA"))


def m_b(rates: GroupRates) -> float:
    """False-negative-rate balance, ``1 - |fnr_u - fnr_p|``."""
    return 1.0 - abs(rates.get("fnr_u", "MB") - rates.get("fnr_p", "MB"))


def accuracy(bundle: PredictionBundle) -> float:
    return float(np.mean(bundle.labels == bundle.predicted_labels))


def f1(bundle: PredictionBundle) -> float:
    y, yhat = bundle.labels, bundle.predicted_labels
    tp = int(np.sum((y == 1) & (yhat == 1)))
    fp = int(np.sum((y == 0) & (yhat == 1)))
    fn = int(np.sum((y == 1) & (yhat == 0)))
    # 2PR/(P+R) simplified; zero when there are no true positives
    den = 2 * tp + fp + fn
    return 2 * tp / den if tp else 0.0


def auc(bundle: PredictionBundle) -> float:
    """ROC AUC via the Mann-Whitney rank statistic, ties credited one half."""
    y = bundle.labels
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC", "labels contain a single class")
    ranks = rankdata(bundle.scores, method="average")
    u_stat = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u_stat / (n_pos * n_neg))


def auc_pairwise(labels, scores) -> float:
    """Exhaustive O(n^2) AUC; reference oracle for :func:`auc`."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMetricError("AUC", "labels contain a single class")
    twice_wins = 0
    for s_pos in pos:
        for s_neg in neg:
            if s_pos > s_neg:
                twice_wins += 2
            elif s_pos == s_neg:
                twice_wins += 1
    return (twice_wins / 2) / (pos.size * neg.size)


_RATE_METRICS = {
    "DI": di, "SPD": spd, "EOD": eod, "AOD": aod, "ERD": erd, "MA": m_a, "MB": m_b,
}
_UTILITY_METRICS = {"ACC": accuracy, "F1": f1, "AUC": auc}


def raw_metrics(bundle: PredictionBundle, names) -> dict[str, float]:
    """Compute the named raw metrics, sharing one pass over group rates."""
    out = {}
    rates = None
    for name in names:
        if name in _RATE_METRICS:
            if rates is None:
                rates = group_rates(bundle)
            out[name] = float(_RATE_METRICS[name](rates))
        elif name in _UTILITY_METRICS:
            out[name] = float(_UTILITY_METRICS[name](bundle))
        else:
            raise KeyError(f"unknown metric {name!r}")
    return out
