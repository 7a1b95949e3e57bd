"""Non-differentiable rasterisation: Bresenham traces, weight maps, composition.

Images are ``h x w`` float64 grids with ink = 1 on a 0 background; ``pixels[y, x]``
indexes row ``y`` (vertical) and column ``x`` (horizontal).  A segment is inked
only when both of its endpoints are pen-down; traversal stops at the end
marker.  A pen-down point touched by no inked segment (a one-point stroke or a
tap) is rendered as a single pixel so it stays visible to attribution.

Segments are clipped to the canvas rectangle before tracing.  Exported PNGs
and PGMs invert intensity to the conventional black-ink-on-white.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .sketch import PenState, Point, Stroke, VectorSketch, split_strokes


class OffCanvasWarning(UserWarning):
    """A stroke left no ink after clipping to the canvas."""


@dataclass(frozen=True)
class RasterImage:
    w: int
    h: int
    pixels: np.ndarray  # (h, w) float64 in [0, 1]

    def __post_init__(self):
        if self.pixels.shape != (self.h, self.w):
            raise DimensionError(f"pixel grid {self.pixels.shape} does not match {self.h}x{self.w}")
        if self.pixels.size and (self.pixels.min() < 0.0 or self.pixels.max() > 1.0):
            raise DimensionError("pixel intensities must lie in [0, 1]")

    def ink_count(self) -> int:
        return int(np.count_nonzero(self.pixels))


@dataclass(frozen=True)
class WeightMap:
    w: int
    h: int
    mask: np.ndarray  # (h, w) uint8 in {0, 1}

    def __post_init__(self):
        if self.mask.shape != (self.h, self.w):
            raise DimensionError(f"mask grid {self.mask.shape} does not match {self.h}x{self.w}")

    def support_size(self) -> int:
        return int(self.mask.sum())


def bresenham(p0: tuple[int, int], p1: tuple[int, int]) -> list[tuple[int, int]]:
    """8-connected integer line including both endpoints.

    The trace is computed from the lexicographically smaller endpoint so that
    ``bresenham(a, b)`` and ``bresenham(b, a)`` cover the same pixel set; the
    returned list always runs from ``p0`` to ``p1``.
    """
    if p1 < p0:
        return list(reversed(bresenham(p1, p0)))
    x0, y0 = p0
    x1, y1 = p1
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = []
    x, y = x0, y0
    while True:
        out.append((x, y))
        if x == x1 and y == y1:
            return out
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def clip_segment(
    x0: float, y0: float, x1: float, y1: float, w: int, h: int
) -> tuple[float, float, float, float] | None:
    """Liang-Barsky clip against the pixel rectangle [0, w-1] x [0, h-1]."""
    dx = x1 - x0
    dy = y1 - y0
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, x0 - 0.0),
        (dx, (w - 1.0) - x0),
        (-dy, y0 - 0.0),
        (dy, (h - 1.0) - y0),
    ):
        if p == 0.0:
            if q < 0.0:
                return None
        else:
            r = q / p
            if p < 0.0:
                if r > t1:
                    return None
                t0 = max(t0, r)
            else:
                if r < t0:
                    return None
                t1 = min(t1, r)
    return (x0 + t0 * dx, y0 + t0 * dy, x0 + t1 * dx, y0 + t1 * dy)


def _round_px(x: float, y: float) -> tuple[int, int]:
    return int(round(x)), int(round(y))


def _segment_pixels(a: Point, b: Point, w: int, h: int) -> list[tuple[int, int]]:
    clipped = clip_segment(a.x, a.y, b.x, b.y, w, h)
    if clipped is None:
        return []
    return bresenham(_round_px(clipped[0], clipped[1]), _round_px(clipped[2], clipped[3]))


def _trace(points: tuple[Point, ...], w: int, h: int) -> set[tuple[int, int]]:
    """Ink pixels of a point run: Bresenham over down-down segments plus lone dots."""
    ink: set[tuple[int, int]] = set()
    down = [p.pen is PenState.DOWN for p in points]
    for i in range(1, len(points)):
        if points[i].pen is PenState.END:
            break
        if down[i - 1] and down[i]:
            ink.update(_segment_pixels(points[i - 1], points[i], w, h))
    # A pen-down point with no inked incident segment still marks one pixel.
    for i, p in enumerate(points):
        if not down[i]:
            continue
        inked_in = i > 0 and down[i - 1]
        inked_out = i + 1 < len(points) and down[i + 1]
        if inked_in or inked_out:
            continue
        px, py = _round_px(p.x, p.y)
        if 0 <= px < w and 0 <= py < h:
            ink.add((px, py))
    return ink


def _image_from_ink(ink: set[tuple[int, int]], w: int, h: int) -> RasterImage:
    grid = np.zeros((h, w), dtype=np.float64)
    for px, py in ink:
        grid[py, px] = 1.0
    return RasterImage(w, h, grid)


def rasterise(sketch: VectorSketch) -> RasterImage:
    """Binary raster of the whole sketch on its own canvas."""
    return _image_from_ink(_trace(sketch.points, sketch.canvas_w, sketch.canvas_h), sketch.canvas_w, sketch.canvas_h)


def rasterise_stroke(stroke: Stroke, w: int, h: int) -> RasterImage:
    """Binary raster of a single stroke on a blank canvas."""
    return _image_from_ink(_trace(stroke.points, w, h), w, h)


def weight_map(stroke: Stroke, w: int, h: int) -> WeightMap:
    """Indicator mask of the pixels on the stroke's trace.

    The mask is exactly the ink support of :func:`rasterise_stroke`, so longer
    strokes carry more ones.  Warns if the stroke leaves no ink (clipped away).
    """
    ink = _trace(stroke.points, w, h)
    if not ink:
        warnings.warn(
            f"stroke {stroke.index} leaves no ink on a {w}x{h} canvas",
            OffCanvasWarning,
            stacklevel=2,
        )
    mask = np.zeros((h, w), dtype=np.uint8)
    for px, py in ink:
        mask[py, px] = 1
    return WeightMap(w, h, mask)


def stroke_images_and_weights(
    sketch: VectorSketch,
) -> tuple[list[Stroke], list[RasterImage], list[WeightMap]]:
    """Per-stroke rasters and weight maps for a sketch, in drawing order."""
    strokes = split_strokes(sketch)
    w, h = sketch.canvas_w, sketch.canvas_h
    images = [rasterise_stroke(s, w, h) for s in strokes]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OffCanvasWarning)
        weights = [weight_map(s, w, h) for s in strokes]
    return strokes, images, weights


def compose(stroke_images: list[RasterImage], weights: list[WeightMap]) -> RasterImage:
    """Clamped weighted sum of stroke images: ``min(1, sum_k w_k * S_k)``.

    Overlapping strokes saturate the clamp, so the composition of a sketch's
    own stroke rasters reproduces the full raster pixel-exactly.
    """
    if len(stroke_images) != len(weights):
        raise DimensionError(f"{len(stroke_images)} images but {len(weights)} weight maps")
    if not stroke_images:
        raise DimensionError("nothing to compose")
    w, h = stroke_images[0].w, stroke_images[0].h
    total = np.zeros((h, w), dtype=np.float64)
    for img, wm in zip(stroke_images, weights):
        if (img.w, img.h) != (w, h) or (wm.w, wm.h) != (w, h):
            raise DimensionError("all stroke images and weight maps must share dimensions")
        total += wm.mask * img.pixels
    return RasterImage(w, h, np.minimum(total, 1.0))


def overlap_counts(weights: list[WeightMap]) -> np.ndarray:
    """Per-pixel count of strokes whose trace covers the pixel."""
    if not weights:
        raise DimensionError("no weight maps")
    total = np.zeros((weights[0].h, weights[0].w), dtype=np.int64)
    for wm in weights:
        total += wm.mask
    return total


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def to_grayscale_bytes(image: RasterImage) -> np.ndarray:
    """8-bit view with conventional polarity: ink 0 (black) on 255 (white)."""
    return np.round((1.0 - image.pixels) * 255.0).astype(np.uint8)


def png_bytes(image: RasterImage) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(to_grayscale_bytes(image), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def pgm_bytes(image: RasterImage) -> bytes:
    """Binary PGM (P5), bit-exact for golden-file comparisons."""
    header = f"P5\n{image.w} {image.h}\n255\n".encode("ascii")
    return header + to_grayscale_bytes(image).tobytes()
