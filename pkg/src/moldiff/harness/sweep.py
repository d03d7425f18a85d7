"""Full experiment sweep: every flow/width row, trained, sampled, scored."""

from __future__ import annotations

import json

import numpy as np

from ..chem import Dataset
from .config import ExperimentConfig
from .generate import generate_molecules
from .metrics import MetricsReport, evaluate, mean_report
from .report import write_report
from .train import TrainedPipeline, train_experiment

SWEEP_ROWS: tuple[tuple[str, int], ...] = (
    ("gnn_gaussian", 2),
    ("gnn_gaussian", 6),
    ("egnn_gaussian", 2),
    ("egnn_gaussian", 6),
    ("input_space_gaussian", 2),
    ("input_space_gaussian", 6),
    ("heat_1d", 1),
    ("flow_matching", 2),
    ("flow_matching", 6),
)


def run_experiment(cfg: ExperimentConfig,
                   dataset: Dataset | None = None) -> tuple[MetricsReport, TrainedPipeline]:
    """Train one configuration, generate with repetition, and score it.

    The number of molecules per repetition is cfg.sample_count when given,
    otherwise drawn uniformly from cfg.sample_range; percentages are
    averaged over cfg.repetitions draws.
    """
    pipeline = train_experiment(cfg, dataset)
    gen_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(5)[4])

    reps = []
    for _ in range(cfg.repetitions):
        if cfg.sample_count is not None:
            count = cfg.sample_count
        else:
            lo, hi = cfg.sample_range
            count = int(gen_rng.integers(lo, hi + 1))
        candidates = generate_molecules(pipeline, count, gen_rng)
        rep = evaluate(candidates, pipeline.dataset)
        rep.experiment = cfg.experiment
        rep.latent_z = cfg.latent_z
        reps.append(rep)

    report = mean_report(reps)
    report.ae_seconds = pipeline.ae_seconds
    report.flow_seconds = pipeline.flow_seconds
    report.params = pipeline.param_count
    (cfg.run_dir / "metrics.json").write_text(json.dumps(report.to_dict(), indent=2))
    return report, pipeline


def run_all(seed: int, dataset: Dataset | None = None, *, epochs: int = 20,
            subset: int | None = None, sample_count: int | None = None,
            repetitions: int = 5, output_dir: str = "runs",
            dataset_path: str | None = None,
            rows: tuple[tuple[str, int], ...] = SWEEP_ROWS) -> list[MetricsReport]:
    """Run the whole sweep and emit results.csv plus the three figures."""
    reports = []
    for experiment, z in rows:
        cfg = ExperimentConfig(
            experiment=experiment, latent_z=z, epochs=epochs, subset=subset,
            seed=seed, sample_count=sample_count, repetitions=repetitions,
            output_dir=output_dir, dataset=dataset_path)
        report, _ = run_experiment(cfg, dataset)
        reports.append(report)
    write_report(output_dir, reports)
    return reports
