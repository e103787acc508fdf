"""Reproducible per-dof draws for the random entropy selection."""

from __future__ import annotations

import numpy as np

_TINY = 2.0 ** -54


class RngStream:
    """Draws keyed by ``(seed, step, stage)``.

    Each key seeds its own generator, so a draw never depends on how many
    draws came before it (restarts and re-runs of a single stage give the
    same numbers). Values lie in the open interval ``(0, 1)``.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    def theta(self, step: int, stage: int, n: int) -> np.ndarray:
        g = np.random.default_rng([self.seed, int(step), int(stage)])
        x = g.random(n)
        x[x == 0.0] = _TINY
        return x

    def __repr__(self):
        return f"RngStream(seed={self.seed})"
