"""Embedding scorer: conv backbone into a unit-normalised vector, triplet-trained.

The output lives on the unit sphere, so cosine similarity against a reference
embedding is a plain dot product.  Training pulls each sketch towards the
raster of its paired target and pushes away a mismatched one with a margin
hinge on cosine similarity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ScorerError, TrainingError
from .base import Scorer
from . import layers
from .convnet import CONV1_CH, CONV2_CH, _flat_dim
from .layers import (
    Adam,
    conv_backward,
    conv_forward,
    dense_backward,
    dense_forward,
    l2_normalize_backward,
    l2_normalize_forward,
    relu_backward,
    relu_forward,
)

EMBED_DIM = 32
TRIPLET_MARGIN = 0.2


class EmbeddingScorer(Scorer):
    kind = "embedding"

    def __init__(self, params: dict[str, np.ndarray], input_hw: tuple[int, int]):
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        self._input_hw = (int(input_hw[0]), int(input_hw[1]))
        expected = _flat_dim(*self._input_hw)
        if self.params["proj_w"].shape[1] != expected:
            raise ScorerError(
                f"projection expects {self.params['proj_w'].shape[1]} inputs, image gives {expected}"
            )
        self._validate_finite()

    @classmethod
    def init_random(
        cls, input_hw: tuple[int, int], rng: np.random.Generator, dim: int = EMBED_DIM
    ) -> "EmbeddingScorer":
        flat = _flat_dim(*input_hw)
        params = {
            "conv1_w": layers.he_conv(rng, CONV1_CH, 1, 3),
            "conv1_b": np.zeros(CONV1_CH),
            "conv2_w": layers.he_conv(rng, CONV2_CH, CONV1_CH, 3),
            "conv2_b": np.zeros(CONV2_CH),
            "proj_w": layers.he_dense(rng, dim, flat),
            "proj_b": np.zeros(dim),
        }
        return cls(params, input_hw)

    @property
    def input_dims(self) -> tuple[int, int]:
        return self._input_hw

    @property
    def n_outputs(self) -> int:
        return self.params["proj_w"].shape[0]

    def parameter_tensors(self) -> dict[str, np.ndarray]:
        return self.params

    def forward_batch(self, x: np.ndarray):
        p = self.params
        c1, cache1 = conv_forward(x, p["conv1_w"], p["conv1_b"])
        r1, mask1 = relu_forward(c1)
        c2, cache2 = conv_forward(r1, p["conv2_w"], p["conv2_b"])
        r2, mask2 = relu_forward(c2)
        flat = r2.reshape(x.shape[0], -1)
        proj, cachep = dense_forward(flat, p["proj_w"], p["proj_b"])
        emb, cachen = l2_normalize_forward(proj)
        return emb, (cache1, mask1, cache2, mask2, r2.shape, cachep, cachen)

    def backward_batch(self, demb: np.ndarray, cache):
        cache1, mask1, cache2, mask2, r2_shape, cachep, cachen = cache
        grads: dict[str, np.ndarray] = {}
        dproj = l2_normalize_backward(demb, cachen)
        dflat, grads["proj_w"], grads["proj_b"] = dense_backward(dproj, cachep)
        dr2 = dflat.reshape(r2_shape)
        dc2 = relu_backward(dr2, mask2)
        dr1, grads["conv2_w"], grads["conv2_b"] = conv_backward(dc2, cache2)
        dc1 = relu_backward(dr1, mask1)
        dx, grads["conv1_w"], grads["conv1_b"] = conv_backward(dc1, cache1)
        return dx, grads

    def forward_vector(self, pixels: np.ndarray) -> np.ndarray:
        emb, _ = self.forward_batch(pixels[None, None])
        return emb[0]

    def backprop_vector(self, pixels: np.ndarray, dvec: np.ndarray) -> np.ndarray:
        _, cache = self.forward_batch(pixels[None, None])
        dx, _ = self.backward_batch(dvec[None], cache)
        return dx[0, 0]

    def embed(self, image) -> np.ndarray:
        """Unit-normalised embedding of a raster image."""
        return self.forward_vector(self._check_image(image))

    def embed_batch(self, images: np.ndarray) -> np.ndarray:
        emb, _ = self.forward_batch(images[:, None])
        return emb


@dataclass(frozen=True)
class EmbedTrainConfig:
    epochs: int = 15
    lr: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    margin: float = TRIPLET_MARGIN
    val_fraction: float = 0.2


def train_embedding_triplets(
    anchors: np.ndarray,
    positives: np.ndarray,
    negatives: np.ndarray,
    config: EmbedTrainConfig = EmbedTrainConfig(),
) -> EmbeddingScorer:
    """Fit the encoder on explicit (anchor, positive, negative) raster triplets.

    Loss per triplet is ``max(0, margin - cos(a, p) + cos(a, n))``; gradients
    flow through all three shared-weight branches.
    """
    if not anchors.shape == positives.shape == negatives.shape:
        raise TrainingError("triplet arrays must share one shape")
    if anchors.shape[0] < 10:
        raise TrainingError(f"need at least 10 triplets, got {anchors.shape[0]}")
    rng = np.random.default_rng(config.seed)
    model = EmbeddingScorer.init_random(anchors.shape[1:], rng)
    opt = Adam(model.params, lr=config.lr)
    order = np.arange(anchors.shape[0])
    for _ in range(config.epochs):
        rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            sel = order[start : start + config.batch_size]
            ea, ca = model.forward_batch(anchors[sel][:, None])
            ep, cp = model.forward_batch(positives[sel][:, None])
            en, cn = model.forward_batch(negatives[sel][:, None])
            cos_p = (ea * ep).sum(axis=1)
            cos_n = (ea * en).sum(axis=1)
            active = (config.margin - cos_p + cos_n) > 0.0
            scale = active.astype(np.float64)[:, None] / len(sel)
            _, ga = model.backward_batch((en - ep) * scale, ca)
            _, gp = model.backward_batch(-ea * scale, cp)
            _, gn = model.backward_batch(ea * scale, cn)
            opt.step({k: ga[k] + gp[k] + gn[k] for k in ga})
    return model


def train_embedding(
    sketch_images: np.ndarray,
    target_images: np.ndarray,
    config: EmbedTrainConfig = EmbedTrainConfig(),
) -> tuple[EmbeddingScorer, dict]:
    """Triplet training over paired (sketch, target) rasters.

    Anchor = sketch i, positive = target i, negative = target of a random
    other pair.  Reports the fraction of held-out triplets with matched
    similarity above mismatched.
    """
    sketch_images = np.asarray(sketch_images, dtype=np.float64)
    target_images = np.asarray(target_images, dtype=np.float64)
    n = sketch_images.shape[0]
    if n != target_images.shape[0]:
        raise TrainingError("sketch/target pair counts differ")
    if n < 10:
        raise TrainingError(f"need at least 10 pairs, got {n}")

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(n)
    n_val = max(2, int(round(n * config.val_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]

    neg = train_idx[rng.integers(0, len(train_idx), size=len(train_idx))]
    clash = neg == train_idx
    while clash.any():
        neg[clash] = train_idx[rng.integers(0, len(train_idx), size=int(clash.sum()))]
        clash = neg == train_idx
    model = train_embedding_triplets(
        sketch_images[train_idx], target_images[train_idx], target_images[neg], config
    )

    # Held-out triplet accuracy: matched pair beats a cyclic mismatch.
    ea = model.embed_batch(sketch_images[val_idx])
    et = model.embed_batch(target_images[val_idx])
    cos_match = (ea * et).sum(axis=1)
    cos_mismatch = (ea * np.roll(et, 1, axis=0)).sum(axis=1)
    report = {
        "triplet_accuracy": float((cos_match > cos_mismatch).mean()),
        "mean_matched_cos": float(cos_match.mean()),
        "mean_mismatched_cos": float(cos_mismatch.mean()),
        "n_train": int(len(train_idx)),
        "n_val": int(n_val),
    }
    return model, report
