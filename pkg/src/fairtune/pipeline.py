"""Pipeline stages: prepare, train-base, mitigate, bench, report, ablate.

Every stage reads the spec plus earlier artifacts from ``spec.output_dir`` and
writes its own artifacts atomically, so stages can be re-run independently.

Artifact layout::

    dataset_summary.json
    models/base.json
    runs/seed_<s>/log.csv            per-step (episode, t, reward, f_bar, u_bar)
    runs/seed_<s>/frontier.csv       retained models and hull membership
    runs/seed_<s>/models/<id>.json
    bench/baseline.csv               mutation curves
    bench/scatter/<U>_<F>.csv        model_id, u, f, region
    regions.csv                      method, task, model, pair, region, proportion
    report_long.csv                  written by ``report``
"""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import yaml

from . import bench, classifiers
from ._io import atomic_write_text
from .data import load_task
from .errors import ConfigError, FairtuneError
from .experiment import ExperimentSpec, load_spec, measurement_from_dict
from .metrics import PredictionBundle
from .mitigator import mitigate

log = logging.getLogger(__name__)


class StageError(FairtuneError):
    def __init__(self, stage: str, cause: Exception | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage}: {cause}")


def _fmt(x: float) -> str:
    return repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _task_label(spec: ExperimentSpec) -> str:
    return spec.task.dataset_name


def prepare(spec: ExperimentSpec):
    ds = load_task(spec.task)
    summary = {
        "task": spec.task.dataset_name,
        "rows": len(ds),
        "dropped_rows": ds.dropped_rows,
        "features": list(ds.feature_names),
        "split_sizes": [int(ds.train_idx.size), int(ds.tune_idx.size), int(ds.test_idx.size)],
        "favorable_rate": float(ds.labels.mean()),
        "privileged_share": float(ds.sensitive.mean()),
    }
    atomic_write_text(spec.output_dir / "dataset_summary.json", json.dumps(summary, indent=2) + "\n")
    return ds


def train_base(spec: ExperimentSpec, dataset=None):
    ds = dataset if dataset is not None else load_task(spec.task)
    clf = classifiers.init(spec.model, ds.features.shape[1], seed=spec.train.seed)
    clf = classifiers.train_base(clf, ds, spec.train)
    (spec.output_dir / "models").mkdir(parents=True, exist_ok=True)
    classifiers.save_model(clf, spec.output_dir / "models" / "base.json")
    return clf


def _load_base(spec: ExperimentSpec):
    path = spec.output_dir / "models" / "base.json"
    if not path.is_file():
        raise FairtuneError(f"base model {str(path)!r} missing; run train-base first")
    return classifiers.load_model(path)


def _mitigate_seed(spec: ExperimentSpec, seed: int) -> int:
    ds = load_task(spec.task)
    base = _load_base(spec)
    settings = replace(spec.mitigation, seed=seed)
    result = mitigate(base, ds, spec.measurement, settings)
    run_dir = spec.output_dir / "runs" / f"seed_{seed}"
    hull_tags = {e.tag for e in result.hull()}
    rows = [(r["episode"], r["t"], _fmt(r["reward"]), _fmt(r["f_bar"]), _fmt(r["u_bar"]))
            for r in result.log_rows]
    atomic_write_text(run_dir / "log.csv",
                      _csv_text(("episode", "t", "reward", "f_bar", "u_bar"), rows))
    frontier_rows = []
    for e in sorted(result.frontier, key=lambda e: (e.u_bar, -e.f_bar)):
        model_id = f"s{seed}_{e.tag}"
        classifiers.save_model(base.with_theta(e.theta), run_dir / "models" / f"{model_id}.json")
        frontier_rows.append((model_id, e.tag, _fmt(e.f_bar), _fmt(e.u_bar), int(e.tag in hull_tags)))
    atomic_write_text(run_dir / "frontier.csv",
                      _csv_text(("model_id", "tag", "f_bar", "u_bar", "on_hull"), frontier_rows))
    return len(frontier_rows)


def mitigate_all(spec: ExperimentSpec, workers: int = 1) -> None:
    _load_base(spec)
    if workers > 1 and len(spec.repeat_seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_mitigate_seed, [spec] * len(spec.repeat_seeds), spec.repeat_seeds))
    else:
        for seed in spec.repeat_seeds:
            _mitigate_seed(spec, seed)


def _bundle(clf, features, labels, sensitive) -> PredictionBundle:
    return PredictionBundle(labels, classifiers.predict_labels(clf, features),
                            classifiers.predict_scores(clf, features), sensitive)


def mitigated_models(spec: ExperimentSpec):
    """``(model_id, classifier)`` for hull models of every seed, base excluded."""
    out = []
    for seed in spec.repeat_seeds:
        run_dir = spec.output_dir / "runs" / f"seed_{seed}"
        path = run_dir / "frontier.csv"
        if not path.is_file():
            raise FairtuneError(f"frontier {str(path)!r} missing; run mitigate first")
        hull = [r for r in _read_csv(path) if r["on_hull"] == "1"]
        chosen = [r for r in hull if r["tag"] != "base"] or hull
        for r in chosen:
            clf = classifiers.load_model(run_dir / "models" / f"{r['model_id']}.json")
            out.append((r["model_id"], clf))
    return out


def bench_stage(spec: ExperimentSpec) -> dict:
    ds = load_task(spec.task)
    base = _load_base(spec)
    x, y, z = ds.part("test")
    curves = bench.build_baselines(_bundle(base, x, y, z), bench.PAIRS,
                                   spec.bench.repetitions, spec.bench.seed)
    baseline_rows = [(bench.pair_name(p), _fmt(d), _fmt(u), _fmt(f))
                     for p, c in curves.items() for d, (u, f) in zip(c.degrees, c.points)]
    atomic_write_text(spec.output_dir / "bench" / "baseline.csv",
                      _csv_text(("pair", "degree", "u", "f"), baseline_rows))

    models = mitigated_models(spec)
    names = sorted({n for p in bench.PAIRS for n in p})
    scored = [(mid, bench.processed_scores(_bundle(clf, x, y, z), names)) for mid, clf in models]
    labels = {}
    for pair in bench.PAIRS:
        rows, labels[pair] = [], []
        for mid, s in scored:
            pt = (s[pair[0]], s[pair[1]])
            region = bench.classify(pt, curves[pair])
            labels[pair].append(region)
            rows.append((mid, _fmt(pt[0]), _fmt(pt[1]), region.value))
        atomic_write_text(spec.output_dir / "bench" / "scatter" / f"{bench.pair_name(pair)}.csv",
                          _csv_text(("model_id", "u", "f", "region"), rows))
    table = bench.aggregate(labels)
    write_region_table(spec, table)
    return table


def write_region_table(spec: ExperimentSpec, table: dict) -> None:
    rows = []
    for pair, props in table.items():
        name = pair if pair == "mean" else bench.pair_name(pair)
        for region in bench.Region:
            rows.append((spec.method, _task_label(spec), spec.model, name, region.value,
                         _fmt(props[region])))
    atomic_write_text(spec.output_dir / "regions.csv",
                      _csv_text(("method", "task", "model", "pair", "region", "proportion"), rows))


def recompute_from_scatter(out_dir: Path) -> dict:
    """Region proportions per pair, plus their ``"mean"``, from scatter CSVs alone."""
    scatter_dir = Path(out_dir) / "bench" / "scatter"
    files = sorted(scatter_dir.glob("*.csv")) if scatter_dir.is_dir() else []
    if not files:
        raise FairtuneError(f"no scatter files under {str(scatter_dir)!r}; run bench first")
    return bench.aggregate({f.stem: [r["region"] for r in _read_csv(f)] for f in files})


def report(out_dir) -> str:
    out_dir = Path(out_dir)
    regions_path = out_dir / "regions.csv"
    if not regions_path.is_file():
        raise FairtuneError(f"no regions.csv in {str(out_dir)!r}; run bench first")
    region_rows = _read_csv(regions_path)
    recomputed = recompute_from_scatter(out_dir)
    for r in region_rows:
        expected = recomputed[r["pair"]][bench.Region(r["region"])]
        if abs(float(r["proportion"]) - expected) > 1e-12:
            raise FairtuneError(f"regions.csv disagrees with scatter for {r['pair']}/{r['region']}")
    mean = {bench.Region(r["region"]): float(r["proportion"])
            for r in region_rows if r["pair"] == "mean"}
    head = region_rows[0]
    lines = [f"== {head['task']} / {head['model']} / reward {head['method']} =="]
    lines.append("  region distribution (mean over %d metric pairs):" % (len(recomputed) - 1))
    for region in bench.Region:
        lines.append(f"    {region.value:<10s} {100 * mean[region]:6.2f}%")
    long_rows = [(head["method"], head["task"], head["model"], pair, region.value, _fmt(p))
                 for pair, props in sorted(recomputed.items()) if pair != "mean"
                 for region, p in props.items()]
    runs_dir = out_dir / "runs"
    for frontier_path in sorted(runs_dir.glob("seed_*/frontier.csv")) if runs_dir.is_dir() else []:
        lines.append(f"  frontier {frontier_path.parent.name}:")
        for r in _read_csv(frontier_path):
            mark = "*" if r["on_hull"] == "1" else " "
            lines.append(f"   {mark} {r['model_id']:<16s} F={float(r['f_bar']):.4f} "
                         f"U={float(r['u_bar']):.4f}")
    atomic_write_text(out_dir / "report_long.csv",
                      _csv_text(("method", "task", "model", "pair", "region", "proportion"),
                                long_rows))
    return "\n".join(lines) + "\n"


def run(spec: ExperimentSpec, workers: int = 1) -> dict:
    stage = "prepare"
    try:
        ds = prepare(spec)
        stage = "train-base"
        train_base(spec, ds)
        stage = "mitigate"
        mitigate_all(spec, workers)
        stage = "bench"
        table = bench_stage(spec)
        log.info("%s: done, artifacts in %s", spec.name, spec.output_dir)
        return table
    except StageError:
        raise
    except (FairtuneError, OSError, ValueError) as exc:
        raise StageError(stage, exc) from exc


# -- ablation -----------------------------------------------------------------

ABLATION_METRICS = ("MA", "MB", "DI", "SPD", "EOD", "AOD", "ERD", "ACC", "F1", "AUC")


def _run_combo(spec: ExperimentSpec) -> tuple[ExperimentSpec, float]:
    table = run(spec)
    return spec, table["mean"][bench.Region.WIN_WIN]


def ablate(grid_path, out=None, workers: int = 1, seeds=None, task=None, model=None) -> str:
    grid_path = Path(grid_path)
    if not grid_path.is_file():
        raise ConfigError(f"grid: file {str(grid_path)!r} not found")
    grid = yaml.safe_load(grid_path.read_text()) or {}
    if "base_spec" not in grid or not grid.get("combinations"):
        raise ConfigError("grid: keys 'base_spec' and non-empty 'combinations' are required")
    base = load_spec(grid_path.parent / grid["base_spec"])
    base = base.with_overrides(seeds=seeds, task_path=task, model=model, out=out)
    root = base.output_dir
    specs = []
    for i, combo in enumerate(grid["combinations"]):
        measurement = measurement_from_dict(combo)
        sub = replace(base, measurement=measurement,
                      output_dir=root / f"{i:02d}_{measurement.label.replace('+', '-')}")
        specs.append(sub)
    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_combo, specs))
    else:
        results = [_run_combo(s) for s in specs]

    best = max(ww for _, ww in results)
    ordered = sorted(enumerate(results), key=lambda it: (-it[1][1], it[0]))
    rows = []
    for _, (s, ww) in ordered:
        used = set(s.measurement.fairness_metrics + s.measurement.utility_metrics)
        pct = 100.0 * ww / best if best > 0 else 0.0
        rows.append((*("+" if m in used else "" for m in ABLATION_METRICS),
                     s.measurement.label, "yes" if s.is_default_reward else "",
                     f"{100 * ww:.2f}", f"{pct:.1f}", f"{100 * ww:.2f}({pct:.2f}%)"))
    header = (*ABLATION_METRICS, "combination", "default", "win_win_pct",
              "pct_of_best", "display")
    text = _csv_text(header, rows)
    atomic_write_text(root / "ablation.csv", text)
    return text
