"""Fixed linear scorer: one weight image per output, exact gradients for free."""

from __future__ import annotations

import numpy as np

from ..errors import ScorerError
from .base import Scorer


class LinearScorer(Scorer):
    """Outputs ``v[c] = <W_c, X> + b_c``; the pixel gradient of a logit is its weight image."""

    kind = "linear"

    def __init__(self, weights: np.ndarray, bias: np.ndarray | None = None):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim == 2:
            weights = weights[None]
        if weights.ndim != 3:
            raise ScorerError("weights must be (C, h, w) or (h, w)")
        self.weights = weights
        self.bias = (
            np.zeros(weights.shape[0], dtype=np.float64)
            if bias is None
            else np.asarray(bias, dtype=np.float64)
        )
        if self.bias.shape != (weights.shape[0],):
            raise ScorerError("bias must have one entry per output")
        self._validate_finite()

    @property
    def input_dims(self) -> tuple[int, int]:
        return self.weights.shape[1], self.weights.shape[2]

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[0]

    def forward_vector(self, pixels: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, pixels, axes=([1, 2], [0, 1])) + self.bias

    def backprop_vector(self, pixels: np.ndarray, dvec: np.ndarray) -> np.ndarray:
        return np.tensordot(dvec, self.weights, axes=(0, 0))

    def parameter_tensors(self) -> dict[str, np.ndarray]:
        return {"weights": self.weights, "bias": self.bias}
