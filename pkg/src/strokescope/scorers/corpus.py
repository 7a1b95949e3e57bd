"""Self-contained synthetic sketch corpora: parametric polyline shapes plus jitter.

Instances are closed outlines (circle / square / triangle) drawn as a few
strokes in a fixed order, the way a person would: shape first, any clutter
last.  Each stroke ends with a pen-up point duplicating its final coordinate,
so the hard raster closes the outline.  A "photo" of an instance is the clean
(jitter-free, single-stroke) raster of the same geometry, which gives the
embedding experiments ground-truth pairs without shipping any dataset.

Real QuickDraw-format NDJSON with a label field can be loaded instead via
:func:`load_labeled_ndjson`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError
from ..raster import rasterise
from ..sketch import PenState, Point, VectorSketch, iter_ndjson, normalize, split_strokes

CLASS_NAMES = ("circle", "square", "triangle")
DEFAULT_CANVAS = 48


@dataclass(frozen=True)
class ShapeInstance:
    kind: str
    cx: float
    cy: float
    rx: float
    ry: float
    rotation: float


def sample_instance(kind: str, rng: np.random.Generator, canvas: int) -> ShapeInstance:
    r = canvas * rng.uniform(0.28, 0.40)
    # Squares keep a near-unit aspect; a strongly sheared square reads as a
    # rhombus and collapses the class distinctions at toy resolution.
    aspect = rng.uniform(0.95, 1.05) if kind == "square" else rng.uniform(0.85, 1.15)
    return ShapeInstance(
        kind=kind,
        cx=canvas / 2 + canvas * rng.uniform(-0.06, 0.06),
        cy=canvas / 2 + canvas * rng.uniform(-0.06, 0.06),
        rx=r * aspect,
        ry=r / aspect,
        rotation=rng.uniform(0.0, 2.0 * math.pi),
    )


def _corner_outline(inst: ShapeInstance, corners: int, per_side: int) -> np.ndarray:
    """Closed polygon outline: corners joined by subdivided straight sides."""
    angles = inst.rotation + 2.0 * math.pi * np.arange(corners) / corners
    cs = np.stack([np.cos(angles) * inst.rx, np.sin(angles) * inst.ry], axis=1)
    pts = []
    for i in range(corners):
        a, b = cs[i], cs[(i + 1) % corners]
        for j in range(per_side):
            t = j / per_side
            pts.append(a + t * (b - a))
    pts.append(cs[0])
    out = np.array(pts)
    out[:, 0] += inst.cx
    out[:, 1] += inst.cy
    return out


def instance_outline(inst: ShapeInstance) -> np.ndarray:
    if inst.kind == "circle":
        angles = inst.rotation + np.linspace(0.0, 2.0 * math.pi, 25)
        out = np.stack(
            [inst.cx + np.cos(angles) * inst.rx, inst.cy + np.sin(angles) * inst.ry], axis=1
        )
        return out
    if inst.kind == "square":
        return _corner_outline(inst, 4, 4)
    if inst.kind == "triangle":
        return _corner_outline(inst, 3, 5)
    raise TrainingError(f"unknown shape kind {inst.kind!r}")


def _clamp_outline(outline: np.ndarray, canvas: int) -> np.ndarray:
    return np.clip(outline, 1.0, canvas - 2.0)


def outline_to_strokes(
    outline: np.ndarray, rng: np.random.Generator, n_strokes: int
) -> list[Point]:
    """Split a closed outline into strokes; each stroke's pen-up duplicates its last point.

    Cut points are jittered around an even division so no stroke degenerates
    to a sliver, the way people split a shape into comparable arcs.
    """
    n_segs = outline.shape[0] - 1
    n_strokes = max(1, min(n_strokes, n_segs // 3))
    even = np.linspace(0, n_segs, n_strokes + 1)
    cuts = []
    for k in range(1, n_strokes):
        lo = int(even[k - 1]) + 2
        hi = int(even[k + 1]) - 2
        mid = int(round(even[k] + rng.uniform(-0.15, 0.15) * n_segs / n_strokes))
        cuts.append(int(np.clip(mid, max(lo, 1), min(hi, n_segs - 1))))
    bounds = [0, *sorted(set(cuts)), n_segs]
    pts: list[Point] = []
    for s, e in zip(bounds, bounds[1:]):
        for i in range(s, e + 1):
            pts.append(Point(float(outline[i, 0]), float(outline[i, 1]), PenState.DOWN))
        pts.append(Point(float(outline[e, 0]), float(outline[e, 1]), PenState.UP))
    return pts


def sketch_from_instance(
    inst: ShapeInstance,
    rng: np.random.Generator,
    canvas: int,
    jitter: float = 0.008,
    n_strokes: int | None = None,
) -> VectorSketch:
    outline = instance_outline(inst)
    outline = outline + rng.normal(0.0, jitter * canvas, size=outline.shape)
    outline[-1] = outline[0]  # keep the loop closed after jitter
    outline = _clamp_outline(outline, canvas)
    if n_strokes is None:
        n_strokes = int(rng.integers(2, 5))
    return VectorSketch(tuple(outline_to_strokes(outline, rng, n_strokes)), canvas, canvas)


def photo_from_instance(inst: ShapeInstance, canvas: int) -> VectorSketch:
    """Clean single-stroke rendering of the instance, used as the retrieval target."""
    outline = _clamp_outline(instance_outline(inst), canvas)
    return VectorSketch(tuple(outline_to_strokes(outline, np.random.default_rng(0), 1)), canvas, canvas)


def add_noise_strokes(
    sketch: VectorSketch,
    rng: np.random.Generator,
    count: int = 1,
    points_range: tuple[int, int] = (2, 4),
) -> tuple[VectorSketch, list[int]]:
    """Append short random scribbles after the real strokes.

    Returns the noisy sketch and the injected strokes' indices in drawing
    order.  A scribble of k walk points becomes a (k+1)-point stroke.
    """
    canvas = sketch.canvas_w
    base = [p for p in sketch.points if p.pen is not PenState.END]
    n_before = len(split_strokes(sketch))
    pts = list(base)
    for _ in range(count):
        n = int(rng.integers(points_range[0], points_range[1] + 1))
        x = rng.uniform(0.1 * canvas, 0.9 * canvas)
        y = rng.uniform(0.1 * canvas, 0.9 * canvas)
        walk = []
        for _ in range(n):
            walk.append((x, y))
            x = float(np.clip(x + rng.normal(0.0, 0.08 * canvas), 1.0, canvas - 2.0))
            y = float(np.clip(y + rng.normal(0.0, 0.08 * canvas), 1.0, canvas - 2.0))
        for wx, wy in walk:
            pts.append(Point(wx, wy, PenState.DOWN))
        pts.append(Point(*walk[-1], PenState.UP))
    noisy = sketch.with_points(pts)
    return noisy, list(range(n_before, n_before + count))


def make_classification_corpus(
    per_class: int,
    seed: int = 0,
    canvas: int = DEFAULT_CANVAS,
    classes: tuple[str, ...] = CLASS_NAMES,
) -> tuple[list[VectorSketch], np.ndarray]:
    """Balanced labeled sketches; labels follow the order of ``classes``."""
    rng = np.random.default_rng(seed)
    sketches: list[VectorSketch] = []
    labels: list[int] = []
    for label, kind in enumerate(classes):
        for _ in range(per_class):
            inst = sample_instance(kind, rng, canvas)
            sketches.append(sketch_from_instance(inst, rng, canvas))
            labels.append(label)
    return sketches, np.array(labels, dtype=np.int64)


def make_paired_corpus(
    n_pairs: int,
    seed: int = 0,
    canvas: int = DEFAULT_CANVAS,
    noise_levels: tuple[int, ...] = (0, 0, 1, 2),
    classes: tuple[str, ...] = CLASS_NAMES,
    max_strokes: int = 4,
) -> tuple[list[VectorSketch], list[VectorSketch], list[int]]:
    """(sketch, photo) pairs for embedding training and retrieval experiments.

    Sketches rotate through ``noise_levels`` scribble counts so the corpus
    spans clean to cluttered drawings. Returns sketches, photos and the noise
    count of each pair.
    """
    rng = np.random.default_rng(seed)
    sketches, photos, noise = [], [], []
    for i in range(n_pairs):
        inst = sample_instance(classes[i % len(classes)], rng, canvas)
        sketch = sketch_from_instance(
            inst, rng, canvas, n_strokes=int(rng.integers(2, max_strokes + 1))
        )
        k = noise_levels[i % len(noise_levels)]
        if k:
            sketch, _ = add_noise_strokes(sketch, rng, count=k)
        sketches.append(sketch)
        photos.append(photo_from_instance(inst, canvas))
        noise.append(k)
    return sketches, photos, noise


def make_filtering_triplets(
    n_pairs: int,
    seed: int = 0,
    canvas: int = DEFAULT_CANVAS,
    classes: tuple[str, ...] = CLASS_NAMES,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raster triplets that teach an encoder the assisted-drawing priorities.

    Three triplets per instance: (sketch, own photo, other photo) separates
    instances; (photo, partial sketch, noisy sketch) and (photo, full sketch,
    noisy sketch) make clutter strictly worse than a missing stroke, so
    removing a scribble raises similarity while dropping a genuine stroke
    stays near-neutral.
    """
    rng = np.random.default_rng(seed)
    sketches, photos, _ = make_paired_corpus(
        n_pairs, seed=seed + 1, canvas=canvas, noise_levels=(0,), classes=classes, max_strokes=3
    )
    ph_img = rasterize_all(photos)
    sk_img = rasterize_all(sketches)
    anchors, positives, negatives = [], [], []
    for i, sketch in enumerate(sketches):
        j = (i + 1 + int(rng.integers(0, n_pairs - 1))) % n_pairs
        anchors.append(sk_img[i])
        positives.append(ph_img[i])
        negatives.append(ph_img[j])

        strokes = split_strokes(sketch)
        drop = int(rng.integers(0, len(strokes)))
        partial_pts = [p for k, s in enumerate(strokes) if k != drop for p in s.points]
        partial = sketch.with_points(partial_pts)
        noisy, _ = add_noise_strokes(sketch, rng, count=int(rng.integers(1, 4)))
        anchors.append(ph_img[i])
        positives.append(rasterise(partial).pixels)
        negatives.append(rasterise(noisy).pixels)

        noisy2, _ = add_noise_strokes(sketch, rng, count=int(rng.integers(1, 4)))
        anchors.append(ph_img[i])
        positives.append(sk_img[i])
        negatives.append(rasterise(noisy2).pixels)
    return np.stack(anchors), np.stack(positives), np.stack(negatives)


def rasterize_all(sketches: list[VectorSketch], soft: bool = False) -> np.ndarray:
    """(N, h, w) float64 stack of rasters; soft uses the differentiable renderer."""
    if soft:
        from ..diffraster import soft_render

        return np.stack([soft_render(s).pixels for s in sketches])
    return np.stack([rasterise(s).pixels for s in sketches])


def load_labeled_ndjson(
    data: bytes | str, canvas: int = DEFAULT_CANVAS
) -> tuple[list[VectorSketch], np.ndarray, list[str]]:
    """QuickDraw-format NDJSON with a label field, normalised onto ``canvas``."""
    sketches, names = [], []
    for sketch, label in iter_ndjson(data):
        if label is None:
            raise TrainingError("NDJSON corpus line is missing a label field")
        sketches.append(normalize(sketch, canvas, canvas))
        names.append(label)
    class_names = sorted(set(names))
    index = {c: i for i, c in enumerate(class_names)}
    labels = np.array([index[c] for c in names], dtype=np.int64)
    return sketches, labels, class_names
