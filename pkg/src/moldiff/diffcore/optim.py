"""Adam optimizer with bias correction.

The state re-bases every parameter onto one contiguous buffer so the
moment updates run as a handful of whole-vector ufuncs instead of ten
small ones per parameter. Parameters keep their shapes; their ``.data``
arrays become views into the shared buffer.
"""

from __future__ import annotations

import numpy as np

from .tensor import ShapeMismatch, Tensor


class AdamState:
    def __init__(self, params: list[Tensor], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0

        sizes = [p.data.size for p in self.params]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.intp)
        self._flat = np.concatenate(
            [p.data.ravel() for p in self.params]) if self.params else np.zeros(0)
        for p, lo, hi in zip(self.params, self._offsets[:-1], self._offsets[1:]):
            p.data = self._flat[lo:hi].reshape(p.data.shape)
        self.m = np.zeros_like(self._flat)
        self.v = np.zeros_like(self._flat)
        self._g = np.zeros_like(self._flat)


def adam_step(state: AdamState, grads: dict[Tensor, np.ndarray]) -> list[Tensor]:
    """One Adam update in place; parameters absent from ``grads`` see a
    zero gradient."""
    state.step += 1
    g = state._g
    g[:] = 0.0
    for p, lo, hi in zip(state.params, state._offsets[:-1], state._offsets[1:]):
        pg = grads.get(p)
        if pg is None:
            continue
        if pg.shape != p.data.shape:
            raise ShapeMismatch(f"gradient {pg.shape} for parameter {p.data.shape}")
        g[lo:hi] = pg.ravel()

    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * g
    state.v *= b2
    state.v += (1.0 - b2) * (g * g)
    m_hat = state.m / (1.0 - b1 ** state.step)
    v_hat = state.v / (1.0 - b2 ** state.step)
    state._flat -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state.params
