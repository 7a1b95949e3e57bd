"""Shared fixtures: sketch generators, trained toy models, hypothesis strategies."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from strokescope.scorers import LinearScorer, save_model
from strokescope.scorers.convnet import TrainConfig, train_sketch_classifier
from strokescope.scorers.corpus import (
    make_classification_corpus,
    make_filtering_triplets,
)
from strokescope.scorers.embedding import EmbedTrainConfig, train_embedding_triplets
from strokescope.sketch import PenState, Point, VectorSketch

CANVAS = 48


def random_walk_sketch(
    rng: np.random.Generator,
    w: int = CANVAS,
    h: int = CANVAS,
    n_strokes: int | None = None,
    points_per_stroke: tuple[int, int] = (3, 8),
    up_duplicates_last: bool = False,
) -> VectorSketch:
    """Drawing-shaped random sketch: a few smooth multi-point strokes."""
    n_strokes = n_strokes or int(rng.integers(1, 5))
    pts: list[Point] = []
    for _ in range(n_strokes):
        n = int(rng.integers(points_per_stroke[0], points_per_stroke[1] + 1))
        x, y = rng.uniform(4, w - 5), rng.uniform(4, h - 5)
        ang = rng.uniform(0, 2 * np.pi)
        for _ in range(n):
            pts.append(Point(x, y, PenState.DOWN))
            ang += rng.normal(0, 0.6)
            step = rng.uniform(3, 9)
            # Non-integer clamp bounds keep points off exact pixel centers,
            # where the distance field has its (measure-zero) kink.
            x = float(np.clip(x + step * np.cos(ang), 1.25, w - 2.25))
            y = float(np.clip(y + step * np.sin(ang), 1.25, h - 2.25))
        if up_duplicates_last:
            pts.append(Point(pts[-1].x, pts[-1].y, PenState.UP))
        else:
            pts.append(Point(x, y, PenState.UP))
    return VectorSketch(tuple(pts), w, h)


def random_pen_sketch(rng: np.random.Generator, n_points: int, w: int = 32, h: int = 32) -> VectorSketch:
    """Unstructured sketch with arbitrary pen flips, for renderer edge cases."""
    pts = []
    for t in range(n_points):
        pen = PenState.DOWN if (t == 0 or rng.uniform() > 0.25) else PenState.UP
        pts.append(Point(float(rng.uniform(1, w - 2)), float(rng.uniform(1, h - 2)), pen))
    return VectorSketch(tuple(pts), w, h)


# -- hypothesis strategies ----------------------------------------------------

coord = st.floats(min_value=0.0, max_value=31.0, allow_nan=False, allow_infinity=False, width=32)


@st.composite
def sketch_strategy(draw, max_strokes=3, max_points=5, with_end=None):
    n_strokes = draw(st.integers(1, max_strokes))
    pts = []
    for _ in range(n_strokes):
        n = draw(st.integers(1, max_points))
        for _ in range(n):
            pts.append(Point(draw(coord), draw(coord), PenState.DOWN))
        pts.append(Point(draw(coord), draw(coord), PenState.UP))
    end = draw(st.booleans()) if with_end is None else with_end
    if end:
        last = pts[-1]
        pts.append(Point(last.x, last.y, PenState.END))
    return VectorSketch(tuple(pts), 32, 32)


# -- session-scoped trained models -------------------------------------------

@pytest.fixture(scope="session")
def toy_classifier():
    sketches, labels = make_classification_corpus(300, seed=5, canvas=CANVAS)
    model, report = train_sketch_classifier(sketches, labels, TrainConfig(epochs=14, seed=1, val_fraction=0.15))
    assert report["val_accuracy"] >= 0.9
    return model


@pytest.fixture(scope="session")
def toy_embedder():
    anchors, positives, negatives = make_filtering_triplets(240, seed=21, canvas=CANVAS)
    return train_embedding_triplets(anchors, positives, negatives, EmbedTrainConfig(epochs=20, seed=11))


@pytest.fixture(scope="session")
def linear_scorer():
    rng = np.random.default_rng(0)
    return LinearScorer(rng.normal(size=(3, CANVAS, CANVAS)), rng.normal(size=3))


@pytest.fixture(scope="session")
def models_dir(tmp_path_factory, toy_classifier, toy_embedder):
    d = tmp_path_factory.mktemp("models")
    save_model(toy_classifier, d / "clf.ssm")
    save_model(toy_embedder, d / "embed.ssm")
    return d
