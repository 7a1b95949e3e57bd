"""Tiny convolutional classifier with auditable, hand-implemented gradients.

Architecture (fixed): conv 8ch s2 -> relu -> conv 16ch s2 -> relu -> dense 64
-> relu -> dense C.  Small enough to train on a synthetic corpus in seconds
while giving attribution code a genuinely non-linear scorer to differentiate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ScorerError, TrainingError
from .base import Scorer
from . import layers
from .layers import (
    Adam,
    conv_backward,
    conv_forward,
    conv_out_hw,
    dense_backward,
    dense_forward,
    relu_backward,
    relu_forward,
    softmax_cross_entropy,
)

HIDDEN = 64
CONV1_CH = 8
CONV2_CH = 16


def _flat_dim(h: int, w: int) -> int:
    h1, w1 = conv_out_hw(h, w, 3, 2, 1)
    h2, w2 = conv_out_hw(h1, w1, 3, 2, 1)
    return CONV2_CH * h2 * w2


class TinyConvClassifier(Scorer):
    kind = "conv_classifier"

    def __init__(self, params: dict[str, np.ndarray], input_hw: tuple[int, int]):
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        self._input_hw = (int(input_hw[0]), int(input_hw[1]))
        expected = _flat_dim(*self._input_hw)
        if self.params["fc1_w"].shape[1] != expected:
            raise ScorerError(
                f"fc1 expects {self.params['fc1_w'].shape[1]} inputs, image gives {expected}"
            )
        self._validate_finite()

    @classmethod
    def init_random(
        cls, input_hw: tuple[int, int], n_classes: int, rng: np.random.Generator
    ) -> "TinyConvClassifier":
        if n_classes < 1:
            raise ScorerError("need at least one class")
        flat = _flat_dim(*input_hw)
        params = {
            "conv1_w": layers.he_conv(rng, CONV1_CH, 1, 3),
            "conv1_b": np.zeros(CONV1_CH),
            "conv2_w": layers.he_conv(rng, CONV2_CH, CONV1_CH, 3),
            "conv2_b": np.zeros(CONV2_CH),
            "fc1_w": layers.he_dense(rng, HIDDEN, flat),
            "fc1_b": np.zeros(HIDDEN),
            "fc2_w": layers.he_dense(rng, n_classes, HIDDEN),
            "fc2_b": np.zeros(n_classes),
        }
        return cls(params, input_hw)

    @property
    def input_dims(self) -> tuple[int, int]:
        return self._input_hw

    @property
    def n_outputs(self) -> int:
        return self.params["fc2_w"].shape[0]

    def parameter_tensors(self) -> dict[str, np.ndarray]:
        return self.params

    # -- batch forward/backward ---------------------------------------------

    def forward_batch(self, x: np.ndarray):
        p = self.params
        c1, cache1 = conv_forward(x, p["conv1_w"], p["conv1_b"])
        r1, mask1 = relu_forward(c1)
        c2, cache2 = conv_forward(r1, p["conv2_w"], p["conv2_b"])
        r2, mask2 = relu_forward(c2)
        flat = r2.reshape(x.shape[0], -1)
        f1, cachef1 = dense_forward(flat, p["fc1_w"], p["fc1_b"])
        r3, mask3 = relu_forward(f1)
        logits, cachef2 = dense_forward(r3, p["fc2_w"], p["fc2_b"])
        return logits, (cache1, mask1, cache2, mask2, r2.shape, cachef1, mask3, cachef2)

    def backward_batch(self, dlogits: np.ndarray, cache):
        cache1, mask1, cache2, mask2, r2_shape, cachef1, mask3, cachef2 = cache
        grads: dict[str, np.ndarray] = {}
        dr3, grads["fc2_w"], grads["fc2_b"] = dense_backward(dlogits, cachef2)
        df1 = relu_backward(dr3, mask3)
        dflat, grads["fc1_w"], grads["fc1_b"] = dense_backward(df1, cachef1)
        dr2 = dflat.reshape(r2_shape)
        dc2 = relu_backward(dr2, mask2)
        dr1, grads["conv2_w"], grads["conv2_b"] = conv_backward(dc2, cache2)
        dc1 = relu_backward(dr1, mask1)
        dx, grads["conv1_w"], grads["conv1_b"] = conv_backward(dc1, cache1)
        return dx, grads

    # -- scorer surface ------------------------------------------------------

    def forward_vector(self, pixels: np.ndarray) -> np.ndarray:
        logits, _ = self.forward_batch(pixels[None, None])
        return logits[0]

    def backprop_vector(self, pixels: np.ndarray, dvec: np.ndarray) -> np.ndarray:
        _, cache = self.forward_batch(pixels[None, None])
        dx, _ = self.backward_batch(dvec[None], cache)
        return dx[0, 0]

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        logits, _ = self.forward_batch(images[:, None])
        return logits.argmax(axis=1)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 12
    lr: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    val_fraction: float = 0.2


def train_tiny_classifier(
    images: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig = TrainConfig(),
) -> tuple[TinyConvClassifier, dict]:
    """Train on (N, h, w) rasters with integer labels; deterministic given the seed.

    Requires at least two classes and 20 examples per class.  Returns the
    trained scorer and a report with train/val accuracy.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise TrainingError(f"need at least 2 classes, got {len(classes)}")
    if counts.min() < 20:
        raise TrainingError(f"need at least 20 examples per class, got {counts.min()}")

    rng = np.random.default_rng(config.seed)
    n = images.shape[0]
    order = rng.permutation(n)
    n_val = max(1, int(round(n * config.val_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]

    model = TinyConvClassifier.init_random(images.shape[1:], int(classes.max()) + 1, rng)
    opt = Adam(model.params, lr=config.lr)

    x_train, y_train = images[train_idx], labels[train_idx]
    for _ in range(config.epochs):
        perm = rng.permutation(len(train_idx))
        for start in range(0, len(perm), config.batch_size):
            sel = perm[start : start + config.batch_size]
            logits, cache = model.forward_batch(x_train[sel][:, None])
            _, dlogits = softmax_cross_entropy(logits, y_train[sel])
            _, grads = model.backward_batch(dlogits, cache)
            opt.step(grads)

    report = {
        "train_accuracy": float((model.predict_batch(x_train) == y_train).mean()),
        "val_accuracy": float((model.predict_batch(images[val_idx]) == labels[val_idx]).mean()),
        "n_train": int(len(train_idx)),
        "n_val": int(n_val),
        "n_classes": int(len(classes)),
    }
    return model, report


def train_sketch_classifier(
    sketches,
    labels: np.ndarray,
    config: TrainConfig = TrainConfig(),
) -> tuple[TinyConvClassifier, dict]:
    """Train on both hard and soft renders of the sketches, split by sketch.

    The val split is held out before the renders are duplicated, so the
    reported accuracy is measured on drawings the model never saw in either
    rendering style (hard-render accuracy; the soft one is reported alongside).
    """
    from .corpus import rasterize_all

    labels = np.asarray(labels, dtype=np.int64)
    hard = rasterize_all(sketches)
    soft = rasterize_all(sketches, soft=True)
    rng = np.random.default_rng(config.seed)
    n = len(sketches)
    order = rng.permutation(n)
    n_val = max(1, int(round(n * config.val_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]

    train_images = np.concatenate([hard[train_idx], soft[train_idx]])
    train_labels = np.concatenate([labels[train_idx], labels[train_idx]])
    inner = TrainConfig(
        epochs=config.epochs,
        lr=config.lr,
        batch_size=config.batch_size,
        seed=config.seed,
        val_fraction=0.05,  # inner split only guards against divergence
    )
    model, _ = train_tiny_classifier(train_images, train_labels, inner)
    report = {
        "val_accuracy": float((model.predict_batch(hard[val_idx]) == labels[val_idx]).mean()),
        "val_accuracy_soft": float((model.predict_batch(soft[val_idx]) == labels[val_idx]).mean()),
        "train_accuracy": float((model.predict_batch(hard[train_idx]) == labels[train_idx]).mean()),
        "n_train": int(len(train_idx)),
        "n_val": int(n_val),
    }
    return model, report
