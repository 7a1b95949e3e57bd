"""Differentiable scorers standing in for pre-trained downstream models."""

from .base import Scorer, ScoreTarget
from .convnet import TinyConvClassifier, TrainConfig, train_tiny_classifier
from .embedding import EmbeddingScorer, EmbedTrainConfig, train_embedding
from .linear import LinearScorer
from .modelio import load_model, load_model_bytes, model_bytes, save_model

__all__ = [
    "Scorer",
    "ScoreTarget",
    "LinearScorer",
    "TinyConvClassifier",
    "TrainConfig",
    "train_tiny_classifier",
    "EmbeddingScorer",
    "EmbedTrainConfig",
    "train_embedding",
    "save_model",
    "load_model",
    "load_model_bytes",
    "model_bytes",
]


def score(scorer, image, target):
    """Scalar score of an image under the given target reduction."""
    return scorer.score(image, target)


def pixel_gradient(scorer, image, target):
    """Exact gradient of the score with respect to every pixel."""
    return scorer.pixel_gradient(image, target)


def embed(scorer, image):
    """Unit-normalised embedding (embedding scorers only)."""
    from ..errors import ScorerError

    if not isinstance(scorer, EmbeddingScorer):
        raise ScorerError(f"embed needs an embedding scorer, got {scorer.kind!r}")
    return scorer.embed(image)
