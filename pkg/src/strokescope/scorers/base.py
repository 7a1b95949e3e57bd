"""Scorer interface: differentiable scalar heads over a raster image.

A scorer maps an image to an output vector (logits or an embedding); a
:class:`ScoreTarget` reduces that vector to one scalar.  Every scorer exposes
the exact gradient of that scalar with respect to each input pixel, which is
the quantity all attribution code consumes.  Scorers are immutable after
construction and scoring is pure, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, ScorerError
from ..raster import RasterImage

_COSINE_EPS = 1e-12


@dataclass(frozen=True)
class ScoreTarget:
    """Reduction of a scorer's output vector to the scalar being explained."""

    mode: str  # class_logit | class_loss | cosine_sim | embedding_sum
    class_index: int | None = None
    reference: np.ndarray | None = None

    @classmethod
    def class_logit(cls, c: int) -> "ScoreTarget":
        return cls("class_logit", class_index=int(c))

    @classmethod
    def class_loss(cls, c: int) -> "ScoreTarget":
        return cls("class_loss", class_index=int(c))

    @classmethod
    def cosine_sim(cls, reference: np.ndarray) -> "ScoreTarget":
        ref = np.asarray(reference, dtype=np.float64)
        if ref.ndim != 1:
            raise ScorerError("reference embedding must be a flat vector")
        return cls("cosine_sim", reference=ref)

    @classmethod
    def embedding_sum(cls) -> "ScoreTarget":
        return cls("embedding_sum")


def _softmax(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - v.max())
    return e / e.sum()

def _reduce(vec: np.ndarray, target: ScoreTarget) -> tuple[float, np.ndarray]:
    """Scalar value and its gradient with respect to the output vector."""
    if target.mode == "class_logit":
        c = target.class_index
        dvec = np.zeros_like(vec)
        dvec[c] = 1.0
        return float(vec[c]), dvec
    if target.mode == "class_loss":
        c = target.class_index
        p = _softmax(vec)
        dvec = p.copy()
        dvec[c] -= 1.0
        return float(-np.log(max(p[c], 1e-300))), dvec
    if target.mode == "cosine_sim":
        r = target.reference
        if r.shape != vec.shape:
            raise ScorerError(f"reference dim {r.shape[0]} does not match output dim {vec.shape[0]}")
        nv = float(np.linalg.norm(vec))
        nr = float(np.linalg.norm(r))
        if nv < _COSINE_EPS or nr < _COSINE_EPS:
            return 0.0, np.zeros_like(vec)
        cos = float(vec @ r) / (nv * nr)
        dvec = r / (nv * nr) - cos * vec / (nv * nv)
        return cos, dvec
    if target.mode == "embedding_sum":
        return float(vec.sum()), np.ones_like(vec)
    raise ScorerError(f"unknown target mode {target.mode!r}")


class Scorer:
    """Base for the concrete scorers. Subclasses provide the vector head."""

    kind: str = "abstract"

    @property
    def input_dims(self) -> tuple[int, int]:
        raise NotImplementedError

    @property
    def n_outputs(self) -> int:
        raise NotImplementedError

    def forward_vector(self, pixels: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backprop_vector(self, pixels: np.ndarray, dvec: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameter_tensors(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    # -- shared surface ----------------------------------------------------

    def _check_image(self, image: RasterImage | np.ndarray) -> np.ndarray:
        pixels = image.pixels if isinstance(image, RasterImage) else np.asarray(image, dtype=np.float64)
        if pixels.shape != self.input_dims:
            raise DimensionError(
                f"image {pixels.shape} does not match scorer input {self.input_dims}"
            )
        return pixels

    def _check_target(self, target: ScoreTarget) -> None:
        if target.mode in ("class_logit", "class_loss"):
            if target.class_index is None or not 0 <= target.class_index < self.n_outputs:
                raise ScorerError(
                    f"class index {target.class_index} out of range for {self.n_outputs} outputs"
                )
        if target.mode == "class_loss" and self.n_outputs < 2:
            raise ScorerError("class loss needs at least two outputs")

    def score(self, image: RasterImage | np.ndarray, target: ScoreTarget) -> float:
        pixels = self._check_image(image)
        self._check_target(target)
        value, _ = _reduce(self.forward_vector(pixels), target)
        return value

    def pixel_gradient(self, image: RasterImage | np.ndarray, target: ScoreTarget) -> np.ndarray:
        """Exact gradient of score with respect to every pixel intensity."""
        pixels = self._check_image(image)
        self._check_target(target)
        _, dvec = _reduce(self.forward_vector(pixels), target)
        return self.backprop_vector(pixels, dvec)

    def predict(self, image: RasterImage | np.ndarray) -> int:
        """Index of the largest output entry (class prediction for classifiers)."""
        return int(np.argmax(self.forward_vector(self._check_image(image))))

    def _validate_finite(self) -> None:
        for name, tensor in self.parameter_tensors().items():
            if not np.all(np.isfinite(tensor)):
                raise ScorerError(f"non-finite values in parameter {name!r}")
