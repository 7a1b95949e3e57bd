"""Differentiable rendering through a soft-thresholded minimum-distance field.

Every pixel's intensity is ``sigmoid(a - b * d)`` where ``d`` is the minimum
over all segments of the point-to-segment distance, with non-drawn segments
(previous point not pen-down) pushed out of reach by a large additive offset.
Both the field and the sigmoid are differentiable in the point coordinates, so
pixel gradients can be pulled back to every ``(x_t, y_t)`` analytically.  Pen
flags are discrete and receive no gradient.

The minimum is routed to the lowest segment index on ties, making results
bitwise deterministic.  Distances are plain pixel units, so the ``a``/``b``
defaults, chosen for a 256-square canvas, describe an absolute stroke
thickness at any resolution; scale them for other canvas sizes if relative
thickness matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SketchValidationError
from .raster import RasterImage
from .sketch import VectorSketch

DEFAULT_OFFSET = 2.0
DEFAULT_SLOPE = 5.0
MASK_OFFSET = 1e6

# Below this distance the unit normal e/d is numerically meaningless; the
# distance kink there gets a zero subgradient.
_ZERO_DIST = 1e-12


@dataclass(frozen=True)
class RenderParams:
    a: float = DEFAULT_OFFSET
    b: float = DEFAULT_SLOPE
    mask_offset: float = MASK_OFFSET

    def __post_init__(self):
        if self.b <= 0:
            raise SketchValidationError("slope b must be positive")
        if self.mask_offset <= 10.0 * self.a / self.b:
            raise SketchValidationError("mask offset must dwarf the ink half-width a/b")

    def scaled(self, canvas: int, reference: int = 256) -> "RenderParams":
        """Slope adjusted so stroke thickness stays proportional to the canvas."""
        return RenderParams(self.a, self.b * reference / canvas, self.mask_offset)


@dataclass(frozen=True)
class DistanceField:
    w: int
    h: int
    d: np.ndarray  # (h, w) float64, +offset on masked segments, inf with no segments
    argmin_segment: np.ndarray  # (h, w) int32 index of the segment starting point, -1 if none


def point_segment_distance(
    px: float, py: float, ax: float, ay: float, bx: float, by: float
) -> float:
    """Euclidean distance from (px, py) to the closed segment (ax, ay)-(bx, by).

    Endpoint distance when the perpendicular foot falls outside the segment,
    perpendicular distance otherwise; a zero-length segment degrades to the
    distance to its single point.
    """
    dx = bx - ax
    dy = by - ay
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        t = 0.0
    else:
        t = ((px - ax) * dx + (py - ay) * dy) / l2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return math.sqrt(ex * ex + ey * ey)


def _segments(sketch: VectorSketch):
    """Segment endpoint arrays and the pen mask (True = not drawn)."""
    coords = sketch.coords()
    down = sketch.down_flags()
    a = coords[:-1]
    b = coords[1:]
    masked = ~down[:-1]
    return a, b, masked


def _pixel_grid(w: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:h, 0:w]
    return xs.astype(np.float64), ys.astype(np.float64)


def _segment_distance_grid(
    px: np.ndarray, py: np.ndarray, ax: float, ay: float, bx: float, by: float
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised twin of :func:`point_segment_distance`; also returns the foot parameter.

    The arithmetic mirrors the scalar version operation for operation so both
    agree bitwise.
    """
    dx = bx - ax
    dy = by - ay
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        t = np.zeros_like(px)
    else:
        t = ((px - ax) * dx + (py - ay) * dy) / l2
        t = np.clip(t, 0.0, 1.0)
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return np.sqrt(ex * ex + ey * ey), t


def min_distance_field(sketch: VectorSketch) -> DistanceField:
    """Per-pixel minimum of segment distances, masked segments offset out of reach."""
    w, h = sketch.canvas_w, sketch.canvas_h
    px, py = _pixel_grid(w, h)
    best = np.full((h, w), np.inf, dtype=np.float64)
    arg = np.full((h, w), -1, dtype=np.int32)
    a, b, masked = _segments(sketch)
    for s in range(a.shape[0]):
        d, _ = _segment_distance_grid(px, py, a[s, 0], a[s, 1], b[s, 0], b[s, 1])
        if masked[s]:
            d = d + MASK_OFFSET
        better = d < best
        best = np.where(better, d, best)
        arg = np.where(better, np.int32(s), arg)
    return DistanceField(w, h, best, arg)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def soft_render(sketch: VectorSketch, params: RenderParams = RenderParams()) -> RasterImage:
    """Soft raster ``sigmoid(a - b * d(p))`` of the minimum-distance field."""
    field = min_distance_field(sketch)
    masked_d = np.where(
        field.d == np.inf, params.mask_offset, field.d
    )  # blank canvas for segment-free sketches
    z = params.a - params.b * masked_d
    return RasterImage(sketch.canvas_w, sketch.canvas_h, _sigmoid(z))


def render_gradient(
    sketch: VectorSketch,
    params: RenderParams,
    upstream: np.ndarray,
) -> np.ndarray:
    """Backpropagate an upstream pixel gradient to every point coordinate.

    Returns a (T, 2) array of ``(dL/dx_t, dL/dy_t)`` where
    ``L = sum_p upstream(p) * X(p)`` and ``X`` is the soft render.  The min is
    routed to each pixel's argmin segment; the distance gradient splits between
    the segment endpoints by the perpendicular-foot parameter.  Points touching
    only masked segments get zero (the sigmoid is saturated there).
    """
    w, h = sketch.canvas_w, sketch.canvas_h
    if upstream.shape != (h, w):
        raise DimensionError(f"upstream grid {upstream.shape} does not match canvas {h}x{w}")
    grads = np.zeros((sketch.n_points, 2), dtype=np.float64)
    a, b, masked = _segments(sketch)
    if a.shape[0] == 0:
        return grads

    px, py = _pixel_grid(w, h)
    field = min_distance_field(sketch)
    z = params.a - params.b * field.d
    x_img = _sigmoid(np.where(np.isfinite(z), z, -np.inf))
    # dL/dd at each pixel; saturated sigmoids underflow to exactly zero.
    dl_dd = upstream * x_img * (1.0 - x_img) * (-params.b)

    for s in range(a.shape[0]):
        sel = field.argmin_segment == s
        if not sel.any():
            continue
        d, t = _segment_distance_grid(px, py, a[s, 0], a[s, 1], b[s, 0], b[s, 1])
        live = sel & (d > _ZERO_DIST)
        if not live.any():
            continue
        coeff = dl_dd[live] / d[live]
        ex = (px[live] - (a[s, 0] + t[live] * (b[s, 0] - a[s, 0]))) * coeff
        ey = (py[live] - (a[s, 1] + t[live] * (b[s, 1] - a[s, 1]))) * coeff
        w1 = 1.0 - t[live]
        w2 = t[live]
        grads[s, 0] -= float(np.sum(w1 * ex))
        grads[s, 1] -= float(np.sum(w1 * ey))
        grads[s + 1, 0] -= float(np.sum(w2 * ex))
        grads[s + 1, 1] -= float(np.sum(w2 * ey))
    return grads


def pen_state_influence(
    sketch: VectorSketch,
    params: RenderParams,
    upstream: np.ndarray,
) -> np.ndarray:
    """Signed influence of keeping each point's incoming segment rendered.

    Entry ``t`` is the left derivative (pen flag moving 1 -> 0, the direction a
    filter flips it) of ``sum_p upstream(p) * X(p)`` with respect to the
    pen-down flag of the segment ending at point ``t``, scaled down by the
    constant mask offset: positive means the segment's ink raises the
    objective.  Pixels where another segment ties the minimum contribute
    nothing, since their ink survives the flip.  Entry 0 is zero (no incoming
    segment), as is any segment that owns no pixel of the field.
    """
    w, h = sketch.canvas_w, sketch.canvas_h
    if upstream.shape != (h, w):
        raise DimensionError(f"upstream grid {upstream.shape} does not match canvas {h}x{w}")
    influence = np.zeros(sketch.n_points, dtype=np.float64)
    if sketch.n_points < 2:
        return influence

    a, b, masked = _segments(sketch)
    px, py = _pixel_grid(w, h)
    best = np.full((h, w), np.inf)
    second = np.full((h, w), np.inf)
    arg = np.full((h, w), -1, dtype=np.int32)
    for s in range(a.shape[0]):
        d, _ = _segment_distance_grid(px, py, a[s, 0], a[s, 1], b[s, 0], b[s, 1])
        if masked[s]:
            d = d + MASK_OFFSET
        better = d < best
        second = np.where(better, best, np.minimum(second, d))
        best = np.where(better, d, best)
        arg = np.where(better, np.int32(s), arg)

    z = params.a - params.b * best
    x_img = _sigmoid(np.where(np.isfinite(z), z, -np.inf))
    weight = upstream * x_img * (1.0 - x_img) * params.b
    strict = second > best
    for s in range(a.shape[0]):
        sel = (arg == s) & strict
        if sel.any():
            influence[s + 1] = float(weight[sel].sum())
    return influence


def dump_field(field: DistanceField) -> bytes:
    """Row-major little-endian float32 dump of the distance grid, for debugging."""
    return field.d.astype("<f4").tobytes()
