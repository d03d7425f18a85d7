"""Shared fixtures and the central finite-difference gradient checker."""

from __future__ import annotations

import numpy as np
import pytest

from moldiff.diffcore import Tape, backward
from moldiff.harness import synthetic_dataset


def fd_gradcheck(build, params, h: float = 1e-6, floor: float = 1e-6) -> float:
    """Worst relative error between tape gradients and central differences.

    ``build`` must reconstruct the scalar loss from scratch on every call.
    ``floor`` keeps the relative error meaningful when both sides are
    essentially zero (central differences bottom out near 1e-10 from float
    cancellation).
    """
    with Tape() as tape:
        loss = build()
    grads = backward(tape, loss)
    worst = 0.0
    for p in params:
        g = grads.get(p)
        if g is None:
            continue
        flat = p.data.ravel()
        gflat = g.ravel()
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            lp = float(build().data)
            flat[k] = old - h
            lm = float(build().data)
            flat[k] = old
            num = (lp - lm) / (2.0 * h)
            rel = abs(num - gflat[k]) / max(abs(num), abs(gflat[k]), floor)
            worst = max(worst, rel)
    return worst


@pytest.fixture(scope="session")
def corpus():
    """Session-wide synthetic molecule dataset."""
    return synthetic_dataset(400, seed=11)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
