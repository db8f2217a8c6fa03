"""Policy-gradient search over classifier parameters for fairness/utility trade-offs.

A small policy network looks at every classifier parameter (its value and
relative position) and emits the probability of nudging it up. Each episode
starts from the base model, takes ``max_steps`` signed steps, and collects the
reward of every visited model on a tuning batch. The policy is trained with
REINFORCE; every visited model is offered to a Pareto frontier.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from . import classifiers
from .data import TaskDataset, subsample_tuning_batch
from .errors import DegenerateBatchError, DivergenceError, UndefinedMetricError
from .frontier import Frontier, FrontierEntry
from .measurement import Measurement, MeasurementConfig, measure
from .metrics import PredictionBundle
from .nn import DenseStack
from .seeding import rng_for

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-6
POLICY_HIDDEN = (16, 16)


@dataclass(frozen=True)
class MitigationSettings:
    lr: float = 0.01
    decay: float = 0.05
    max_steps: int = 25
    utility_floor: float = 0.9
    episodes: int = 40
    policy_lr: float = 1e-3
    gamma: float = 0.99
    baseline_momentum: float = 0.9
    tuning_batch: int = 256
    batch_retries: int = 10
    seed: int = 0

    def __post_init__(self):
        checks = [
            (self.lr > 0, "lr must be positive"),
            (self.decay >= 0, "decay must be non-negative"),
            (self.max_steps >= 0 and self.episodes >= 0, "max_steps and episodes must be >= 0"),
            (0.0 <= self.utility_floor <= 1.0, "utility_floor must lie in [0, 1]"),
            (self.policy_lr >= 0, "policy_lr must be non-negative"),
            (0.0 < self.gamma <= 1.0, "gamma must lie in (0, 1]"),
            (0.0 <= self.baseline_momentum < 1.0, "baseline_momentum must lie in [0, 1)"),
            (self.tuning_batch >= 1 and self.batch_retries >= 1, "tuning_batch and batch_retries must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)


@dataclass(frozen=True)
class PolicyNet:
    """Shared per-parameter network ``(theta_i, i/n) -> P(a_i = +1)``."""

    phi: np.ndarray = field(repr=False)
    sizes: tuple[int, ...] = (2, *POLICY_HIDDEN, 1)

    @property
    def net(self) -> DenseStack:
        return DenseStack(self.sizes, "tanh")

    @classmethod
    def create(cls, rng) -> "PolicyNet":
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        sizes = (2, *POLICY_HIDDEN, 1)
        return cls(DenseStack(sizes, "tanh").init(rng), sizes)

    @staticmethod
    def inputs(theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.column_stack([theta, np.arange(theta.size) / theta.size])

    def probabilities(self, theta) -> np.ndarray:
        z, _ = self.net.forward(self.phi, self.inputs(theta))
        return np.clip(expit(z[:, 0]), PROB_CLAMP, 1.0 - PROB_CLAMP)


@dataclass(frozen=True)
class EpisodeStep:
    theta: np.ndarray = field(repr=False)
    action: np.ndarray = field(repr=False)
    reward: float
    log_prob: float
    f_bar: float = float("nan")
    u_bar: float = float("nan")


def _log_prob(p: np.ndarray, action: np.ndarray) -> float:
    return float(np.sum(np.where(action > 0, np.log(p), np.log1p(-p))))


def sample_action(policy: PolicyNet, theta, rng):
    """Draw independent +-1 directions; returns ``(action, log_prob)``."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    p = policy.probabilities(theta)
    action = np.where(rng.uniform(size=p.size) < p, 1, -1).astype(np.int8)
    return action, _log_prob(p, action)


def apply_update(theta, action, lr: float, t: int, decay: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    action = np.asarray(action)
    if theta.shape != action.shape:
        raise ValueError("theta and action must have equal lengths")
    return theta + action * (lr / (1.0 + decay * t))


def surrogate_and_grad(policy: PolicyNet, phi, thetas, actions, weights):
    """``sum_t w_t * log pi(A_t | theta_t)`` and its gradient in ``phi``."""
    net = policy.net
    x = np.vstack([policy.inputs(th) for th in thetas])
    a = np.concatenate([np.asarray(ac) for ac in actions])
    w = np.concatenate([np.full(len(th), wt, dtype=float) for th, wt in zip(thetas, weights)])
    z, cache = net.forward(phi, x)
    raw = expit(z[:, 0])
    p = np.clip(raw, PROB_CLAMP, 1.0 - PROB_CLAMP)
    value = float(np.sum(w * np.where(a > 0, np.log(p), np.log1p(-p))))
    # d log p / dz = 1 - p ; d log(1-p) / dz = -p ; zero where clamped
    active = (raw > PROB_CLAMP) & (raw < 1.0 - PROB_CLAMP)
    dz = np.where(active, w * (np.where(a > 0, 1.0, 0.0) - p), 0.0)
    return value, net.backward(phi, cache, dz[:, None])


@dataclass
class ReturnBaseline:
    """Per-time-step exponential moving average of episode returns."""

    momentum: float = 0.9
    values: np.ndarray | None = None

    def advantages(self, returns: np.ndarray) -> np.ndarray:
        if self.values is None:
            self.values = np.empty(0)
        known = min(self.values.size, returns.size)
        base = np.concatenate([self.values[:known], returns[known:]])
        return returns - base

    def update(self, returns: np.ndarray) -> None:
        known = min(self.values.size, returns.size)
        new = returns.copy()
        new[:known] = self.momentum * self.values[:known] + (1 - self.momentum) * returns[:known]
        if self.values.size > returns.size:
            new = np.concatenate([new, self.values[returns.size:]])
        self.values = new


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    out = np.empty(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def reinforce_update(policy: PolicyNet, episode, gamma: float,
                     baseline: ReturnBaseline, policy_lr: float) -> PolicyNet:
    """One REINFORCE ascent step; ``baseline`` is updated in place."""
    if not episode:
        raise ValueError("cannot update from an empty episode")
    returns = discounted_returns([s.reward for s in episode], gamma)
    adv = baseline.advantages(returns)
    baseline.update(returns)
    _, grad = surrogate_and_grad(policy, policy.phi, [s.theta for s in episode],
                                 [s.action for s in episode], adv)
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite policy gradient")
    return replace(policy, phi=policy.phi + policy_lr * grad)


class _Evaluator:
    """Caches tune-split inputs for scoring candidate parameter vectors."""

    def __init__(self, clf, dataset: TaskDataset, measurement: MeasurementConfig):
        self.clf = clf
        self.dataset = dataset
        self.measurement = measurement

    def on(self, theta, idx) -> Measurement:
        model = self.clf.with_theta(theta)
        x = self.dataset.features[idx]
        scores = classifiers.predict_scores(model, x)
        threshold = 0.0 if model.kind == "SVM" else 0.5
        bundle = PredictionBundle(self.dataset.labels[idx], (scores >= threshold).astype(np.int8),
                                  scores, self.dataset.sensitive[idx])
        return measure(bundle, self.measurement)


def run_episode(clf, dataset: TaskDataset, measurement: MeasurementConfig,
                settings: MitigationSettings, policy: PolicyNet, *, rng_actions=None,
                rng_batches=None, frontier: Frontier | None = None,
                base: Measurement | None = None, tag: str = "") -> list[EpisodeStep]:
    """Roll out one episode from ``clf.theta``.

    Rewards come from a fresh tuning batch per step. Frontier coordinates and
    the utility floor use the whole tune split so that models stay comparable.
    """
    rng_actions = rng_actions if rng_actions is not None else rng_for(settings.seed, "actions")
    rng_batches = rng_batches if rng_batches is not None else rng_for(settings.seed, "batches")
    evaluator = _Evaluator(clf, dataset, measurement)
    tune = dataset.tune_idx
    if base is None:
        base = evaluator.on(clf.theta, tune)
    batch_size = min(settings.tuning_batch, tune.size)
    theta = clf.theta.copy()
    steps = []
    for t in range(settings.max_steps):
        action, log_prob = sample_action(policy, theta, rng_actions)
        nxt = apply_update(theta, action, settings.lr, t, settings.decay)
        batch_eval = None
        for _ in range(settings.batch_retries):
            try:
                idx = subsample_tuning_batch(dataset, batch_size, rng_batches)
                batch_eval = evaluator.on(nxt, idx)
                break
            except (UndefinedMetricError, DegenerateBatchError) as exc:
                log.debug("step %d: resampling tuning batch (%s)", t, exc)
        if batch_eval is None:
            log.warning("episode aborted at step %d: no usable tuning batch", t)
            break
        full = evaluator.on(nxt, tune)
        if frontier is not None:
            frontier.add(FrontierEntry(nxt, full.f_bar, full.u_bar, tag=f"{tag}t{t}"))
        steps.append(EpisodeStep(theta, action, batch_eval.reward, log_prob,
                                 full.f_bar, full.u_bar))
        if full.u_bar < settings.utility_floor * base.u_bar:
            break
        theta = nxt
    return steps


@dataclass
class MitigationResult:
    frontier: Frontier
    base: Measurement
    policy: PolicyNet
    reward_traces: list[list[float]]
    log_rows: list[dict]

    def hull(self) -> list[FrontierEntry]:
        return self.frontier.hull()


def mitigate(clf, dataset: TaskDataset, measurement: MeasurementConfig,
             settings: MitigationSettings) -> MitigationResult:
    evaluator = _Evaluator(clf, dataset, measurement)
    base = evaluator.on(clf.theta, dataset.tune_idx)
    frontier = Frontier([FrontierEntry(clf.theta.copy(), base.f_bar, base.u_bar, tag="base")])
    policy = PolicyNet.create(rng_for(settings.seed, "policy"))
    rng_actions = rng_for(settings.seed, "actions")
    rng_batches = rng_for(settings.seed, "batches")
    baseline = ReturnBaseline(settings.baseline_momentum)
    traces, rows = [], []
    for ep in range(settings.episodes):
        steps = run_episode(clf, dataset, measurement, settings, policy,
                            rng_actions=rng_actions, rng_batches=rng_batches,
                            frontier=frontier, base=base, tag=f"e{ep}")
        traces.append([s.reward for s in steps])
        rows.extend({"episode": ep, "t": t, "reward": s.reward, "f_bar": s.f_bar,
                     "u_bar": s.u_bar} for t, s in enumerate(steps))
        if steps:
            policy = reinforce_update(policy, steps, settings.gamma, baseline, settings.policy_lr)
        log.debug("episode %d: %d steps, mean reward %.4f", ep, len(steps),
                  np.mean(traces[-1]) if steps else float("nan"))
    return MitigationResult(frontier, base, policy, traces, rows)
