"""Run orchestration: one training run with snapshots, and the four-way comparison."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from memgan import crossbar as xb
from memgan.checkpoint import save_checkpoint
from memgan.classifier import ClassifierModel, generation_accuracy, train_classifier
from memgan.config import RunConfig
from memgan.entropy import make_source
from memgan.gan import GanModel, run_training
from memgan.imaging import export_image_grid
from memgan.metrics import RunMetrics, write_metrics
from memgan.mnist import Dataset, batches, filter_digit, load_mnist

log = logging.getLogger(__name__)

# the four (mode, noise) configurations run by compare
REFERENCE_RUNS = (
    ("software", "pseudo"),
    ("hw-ideal", "pseudo"),
    ("hw-ideal", "true"),
    ("hw-d2d", "true"),
)
EVAL_SEED_OFFSET = 7919
GRID = (5, 5)


@dataclass
class RunResult:
    mode: str
    noise: str
    metrics: RunMetrics
    model: GanModel
    out_dir: Path | None = None


def noise_sources(cfg: RunConfig):
    """Independent training and evaluation streams of the configured kind."""
    n = cfg.noise
    seed = n.seed
    if n.kind == "pseudo" and seed is None:
        seed = cfg.train.seed
    eval_seed = None if seed is None else seed + EVAL_SEED_OFFSET
    train_src = make_source(n.kind, seed, n.p_switch, n.drift_amplitude)
    eval_src = make_source(n.kind, eval_seed, n.p_switch, n.drift_amplitude)
    return train_src, eval_src


def training_batches(cfg: RunConfig, train: Dataset):
    ds = filter_digit(train, cfg.digit, cfg.digit_cap)
    return batches(ds, cfg.train.batch_size, cfg.shuffle_seed)


def ensure_classifier(path=None, data_dir=None, epochs: int = 20, seed: int = 0) -> ClassifierModel:
    """Load a cached classifier from ``path`` or train one (and cache it there)."""
    if path is not None and Path(path).exists():
        return ClassifierModel.load(path)
    train = load_mnist(data_dir, "train")
    test = load_mnist(data_dir, "test")
    log.info("training classifier for %d epochs", epochs)
    clf = train_classifier(train, epochs=epochs, seed=seed, test=test)
    log.info("classifier test accuracy %.2f%%", clf.test_accuracy)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        clf.save(path)
    return clf


def run_experiment(cfg: RunConfig, train: Dataset, classifier: ClassifierModel | None,
                   out_dir=None) -> RunResult:
    tc = cfg.train
    data = training_batches(cfg, train)
    train_src, eval_src = noise_sources(cfg)
    grid_noise = eval_src.noise_batch(GRID[0] * GRID[1], 100)
    out = None if out_dir is None else Path(out_dir)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(tc.seed)
    model = GanModel.create(tc, rng)
    if out is not None and model.stack is not None:
        xb.save_conductance_map(model.stack, out, tc.mode, 0)

    evaluate = None
    if classifier is not None:
        def evaluate(m):
            return generation_accuracy(classifier, m, eval_src, cfg.eval_samples, cfg.digit)

    def on_batch(step, m):
        if out is None:
            return
        if step % cfg.snapshot_every == 0:
            export_image_grid(m.generate(grid_noise), GRID, out / f"images_{tc.mode}_{step:03d}.pgm")
            if m.stack is not None:
                xb.save_conductance_map(m.stack, out, tc.mode, step)

    metrics, model = run_training(tc, data, train_src, model=model, evaluate=evaluate, on_batch=on_batch)
    if out is not None:
        write_metrics(metrics, out / "metrics.csv")
        save_checkpoint(model, out / "checkpoint.txt", tc.mode)
    return RunResult(tc.mode, cfg.noise.kind, metrics, model, out)


def compare(cfg: RunConfig, train: Dataset, classifier: ClassifierModel, out_dir=None,
            runs=REFERENCE_RUNS) -> list[RunResult]:
    """Run each (mode, noise) pair from the same seeds, data order and classifier."""
    results = []
    out = None if out_dir is None else Path(out_dir)
    for mode, noise in runs:
        sub = None if out is None else out / f"{mode}_{noise}"
        log.info("compare: %s / %s", mode, noise)
        results.append(run_experiment(cfg.with_mode(mode, noise), train, classifier, sub))
    if out is not None:
        write_comparison(results, out / "compare.csv")
    return results


def write_comparison(results, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "noise", "batch", "accuracy_pct", "pulses", "energy_j", "cum_energy_j"])
        for r in results:
            for row in r.metrics.rows:
                w.writerow([r.mode, r.noise, row.batch, repr(row.accuracy_pct), row.pulses,
                            repr(row.energy_j), repr(row.cum_energy_j)])
    return path
