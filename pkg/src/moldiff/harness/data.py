"""Dataset resolution for experiment runs."""

from __future__ import annotations

from collections import Counter

from ..chem import Dataset, canonical_key, load_dataset, synthetic_molecules
from .config import ExperimentConfig


class DatasetError(ValueError):
    pass


def synthetic_dataset(count: int, seed: int = 0) -> Dataset:
    """In-memory stand-in dataset built from the synthetic corpus."""
    mols = synthetic_molecules(count, seed)
    return Dataset(
        molecules=mols,
        canonical_keys={canonical_key(m) for m in mols},
        size_histogram=dict(Counter(m.n for m in mols)),
        skipped=0,
        source=f"synthetic:{count}:{seed}",
    )


def resolve_dataset(cfg: ExperimentConfig, default_count: int = 10_000) -> Dataset:
    """Load the configured SMILES file, or fall back to the synthetic corpus.

    The fallback keeps desk-scale runs self-contained when no real dataset
    file is mounted.
    """
    path = cfg.dataset_path()
    if path is None:
        count = cfg.subset or default_count
        return synthetic_dataset(count, seed=0)
    try:
        return load_dataset(path)
    except OSError as exc:
        raise DatasetError(f"dataset unavailable: {exc}") from exc
