from pathlib import Path

import numpy as np
import pytest

from fairtune import classifiers
from fairtune.data import TaskConfig, load_task
from fairtune.metrics import PredictionBundle

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def make_bundle(groups):
    """Bundle from per-group cell counts ``{z: (tp, fn, fp, tn)}``."""
    labels, preds, sens = [], [], []
    for z, (tp, fn, fp, tn) in groups.items():
        for y, yhat, k in ((1, 1, tp), (1, 0, fn), (0, 1, fp), (0, 0, tn)):
            labels += [y] * k
            preds += [yhat] * k
            sens += [z] * k
    preds = np.array(preds)
    return PredictionBundle(np.array(labels), preds, preds.astype(float), np.array(sens))


@pytest.fixture
def canonical_bundle():
    # unprivileged: 10 pos / 10 neg, TP=6 FP=2; privileged: TP=8 FP=4
    return make_bundle({0: (6, 4, 2, 8), 1: (8, 2, 4, 6)})


@pytest.fixture(scope="session")
def synthetic_task():
    return TaskConfig.from_yaml(CONFIGS / "tasks" / "synthetic.yaml")


@pytest.fixture(scope="session")
def synthetic_ds(synthetic_task):
    return load_task(synthetic_task)


@pytest.fixture(scope="session")
def base_lr(synthetic_ds):
    clf = classifiers.init("LR", synthetic_ds.features.shape[1])
    settings = classifiers.TrainSettings(learning_rate=0.5, epochs=200, batch_size=64, l2=1e-4)
    return classifiers.train_base(clf, synthetic_ds, settings)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
