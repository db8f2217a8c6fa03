"""Parameterised binary classifiers exposing their weights as one flat vector.

Three kinds are supported:

* ``LR``  - logistic regression (cross-entropy loss, sigmoid scores)
* ``SVM`` - linear SVM (hinge loss, raw margins as scores)
* ``NN``  - ReLU network with hidden widths 64-32-16-8-4 and a sigmoid output
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from ._io import atomic_write_text
from .errors import DivergenceError, FairtuneError, ShapeError
from .nn import DenseStack

log = logging.getLogger(__name__)

KINDS = ("LR", "SVM", "NN")
NN_HIDDEN = (64, 32, 16, 8, 4)
MODEL_FORMAT = "fairtune-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainSettings:
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    batch_size: int = 64
    seed: int = 0
    optimizer: str = "sgd"  # "sgd" or "adam"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1 or self.l2 < 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and l2 >= 0 are required")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class ParamClassifier:
    kind: str
    layer_sizes: tuple[int, ...]
    theta: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        theta = np.array(self.theta, dtype=float)
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if theta.shape != (self.net.n_params,):
            raise ShapeError(f"theta has shape {theta.shape}, expected ({self.net.n_params},)")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def net(self) -> DenseStack:
        return DenseStack(self.layer_sizes, "relu")

    @property
    def feature_dim(self) -> int:
        return self.layer_sizes[0]

    def with_theta(self, theta) -> "ParamClassifier":
        return replace(self, theta=np.asarray(theta, dtype=float))

    def __eq__(self, other):
        return (isinstance(other, ParamClassifier) and self.kind == other.kind
                and self.layer_sizes == other.layer_sizes
                and np.array_equal(self.theta, other.theta))

    __hash__ = None


def init(kind: str, feature_dim: int, seed: int = 0) -> ParamClassifier:
    if feature_dim < 1:
        raise ValueError("feature_dim must be at least 1")
    if kind == "NN":
        sizes = (feature_dim, *NN_HIDDEN, 1)
        theta = DenseStack(sizes).init(np.random.default_rng(seed))
    else:
        sizes = (feature_dim, 1)
        theta = np.zeros(feature_dim + 1)
    return ParamClassifier(kind, sizes, theta)


def _check_features(clf: ParamClassifier, features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != clf.feature_dim:
        raise ShapeError(f"expected features of width {clf.feature_dim}, got shape {x.shape}")
    return x


def decision_function(clf: ParamClassifier, features) -> np.ndarray:
    """Raw output logits (LR/NN) or margins (SVM)."""
    x = _check_features(clf, features)
    z, _ = clf.net.forward(clf.theta, x)
    return z[:, 0]


def predict_scores(clf: ParamClassifier, features) -> np.ndarray:
    z = decision_function(clf, features)
    return z if clf.kind == "SVM" else expit(z)


def predict_labels(clf: ParamClassifier, features) -> np.ndarray:
    # ties go to the favorable class
    threshold = 0.0 if clf.kind == "SVM" else 0.5
    return (predict_scores(clf, features) >= threshold).astype(np.int8)


def loss_and_grad(clf: ParamClassifier, theta, features, labels, l2: float = 0.0):
    """Training objective of ``clf.kind`` at ``theta`` and its gradient.

    Cross-entropy for LR/NN, hinge for SVM, each plus ``l2/2 * ||weights||^2``
    (biases are not penalised).
    """
    theta = np.asarray(theta, dtype=float)
    x = _check_features(clf, features)
    y = np.asarray(labels, dtype=float)
    net = clf.net
    z, cache = net.forward(theta, x)
    z = z[:, 0]
    n = y.size
    if clf.kind == "SVM":
        signed = 2.0 * y - 1.0
        slack = 1.0 - signed * z
        loss = float(np.mean(np.maximum(slack, 0.0)))
        dz = np.where(slack > 0, -signed, 0.0) / n
    else:
        # log(1 + e^z) - y z, numerically stable
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        dz = (expit(z) - y) / n
    grad = net.backward(theta, cache, dz[:, None])
    if l2:
        mask = net.weight_mask()
        loss += 0.5 * l2 * float(np.sum(theta[mask] ** 2))
        grad = grad + l2 * np.where(mask, theta, 0.0)
    return loss, grad


def lr_stability_threshold(features, l2: float) -> float:
    """Largest full-batch step size 2/L guaranteeing descent for the LR loss."""
    x = np.asarray(features, dtype=float)
    xb = np.hstack([x, np.ones((x.shape[0], 1))])
    smooth = 0.25 * np.linalg.eigvalsh(xb.T @ xb / x.shape[0])[-1] + l2
    return float(2.0 / smooth)


def fit(clf: ParamClassifier, features, labels, settings: TrainSettings):
    """Mini-batch gradient descent from ``clf.theta``.

    Returns the trained classifier and the per-epoch loss on the full input.
    """
    x = _check_features(clf, features)
    y = np.asarray(labels, dtype=float)
    if y.size == 0:
        raise FairtuneError("cannot train on an empty split")
    if clf.kind == "LR":
        log.info("LR stability threshold 2/L = %.4g (learning_rate=%g)",
                 lr_stability_threshold(x, settings.l2), settings.learning_rate)
    rng = np.random.default_rng(settings.seed)
    theta = clf.theta.copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    history = []
    for epoch in range(settings.epochs):
        order = rng.permutation(y.size)
        for start in range(0, y.size, settings.batch_size):
            idx = order[start:start + settings.batch_size]
            _, grad = loss_and_grad(clf, theta, x[idx], y[idx], settings.l2)
            if settings.optimizer == "adam":
                step += 1
                m = beta1 * m + (1 - beta1) * grad
                v = beta2 * v + (1 - beta2) * grad * grad
                m_hat = m / (1 - beta1 ** step)
                v_hat = v / (1 - beta2 ** step)
                theta -= settings.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            else:
                theta -= settings.learning_rate * grad
        loss, _ = loss_and_grad(clf, theta, x, y, settings.l2)
        if not np.isfinite(loss) or not np.all(np.isfinite(theta)):
            raise DivergenceError(f"training diverged at epoch {epoch}", epoch=epoch)
        history.append(loss)
    return clf.with_theta(theta), history


def train_base(clf: ParamClassifier, dataset, settings: TrainSettings) -> ParamClassifier:
    """Train on the dataset's train split for utility only."""
    idx = dataset.train_idx
    trained, history = fit(clf, dataset.features[idx], dataset.labels[idx], settings)
    if history:
        log.info("base %s training: loss %.5f -> %.5f over %d epochs",
                 clf.kind, history[0], history[-1], len(history))
    return trained


def numeric_gradient_check(clf: ParamClassifier, loss=None, sample=None, *,
                           l2: float = 0.0, n_coords: int = 50, step: float = 1e-5,
                           seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss`` maps theta to ``(value, gradient)``; when omitted, the classifier's
    own training loss on ``sample = (features, labels)`` is used. Relative error
    is ``|g_a - g_n| / max(|g_a|, |g_n|, 1e-6)`` over at most ``n_coords``
    randomly chosen coordinates.
    """
    if loss is None:
        x, y = sample
        def loss(t):
            return loss_and_grad(clf, t, x, y, l2)
    theta = clf.theta.astype(float)
    _, analytic = loss(theta)
    rng = np.random.default_rng(seed)
    coords = rng.choice(theta.size, size=min(n_coords, theta.size), replace=False)
    worst = 0.0
    for i in coords:
        plus, minus = theta.copy(), theta.copy()
        plus[i] += step
        minus[i] -= step
        numeric = (loss(plus)[0] - loss(minus)[0]) / (2 * step)
        denom = max(abs(analytic[i]), abs(numeric), 1e-6)
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst


def to_dict(clf: ParamClassifier) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": clf.kind,
        "layer_sizes": list(clf.layer_sizes),
        "theta": [float(t) for t in clf.theta],
    }


def from_dict(data: dict) -> ParamClassifier:
    if data.get("format") != MODEL_FORMAT:
        raise FairtuneError("not a fairtune model file")
    if data.get("version") != MODEL_VERSION:
        raise FairtuneError(f"unsupported model version {data.get('version')!r}")
    return ParamClassifier(data["kind"], tuple(data["layer_sizes"]),
                           np.array(data["theta"], dtype=float))


def save_model(clf: ParamClassifier, path) -> None:
    """Write ``clf`` as JSON; float repr round-trips exactly."""
    atomic_write_text(path, json.dumps(to_dict(clf)))


def load_model(path) -> ParamClassifier:
    with open(path) as fh:
        return from_dict(json.load(fh))
