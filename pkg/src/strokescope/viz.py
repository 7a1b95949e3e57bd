"""Attribution exports: JSON payloads, SVG overlays, gradient heatmaps."""

from __future__ import annotations

import io
import json

import numpy as np

from .attribution import AttributionResult, CorrReport
from .raster import RasterImage
from .sketch import PenState, VectorSketch, split_strokes

# Diverging scale endpoints: blue for negative, red for positive influence.
_NEG = (59, 76, 192)
_MID = (232, 232, 232)
_POS = (180, 4, 38)


def diverging_color(value: float) -> tuple[int, int, int]:
    """Map a value in [-1, 1] onto the blue-gray-red scale."""
    v = float(np.clip(value, -1.0, 1.0))
    lo, hi = (_NEG, _MID) if v < 0 else (_MID, _POS)
    t = v + 1.0 if v < 0 else v
    return tuple(int(round(a + t * (b - a))) for a, b in zip(lo, hi))


def _normalized(scores: np.ndarray) -> np.ndarray:
    peak = float(np.abs(scores).max())
    if peak == 0.0:
        return np.zeros_like(scores)
    return scores / peak


def attribution_json(
    result: AttributionResult, corr: CorrReport | None = None, extra: dict | None = None
) -> str:
    payload: dict = {
        "granularity": result.granularity,
        "scores": [float(s) for s in result.scores],
        "normalized_scores": [float(s) for s in _normalized(result.scores)],
        "ranking": list(result.ranking),
    }
    if result.point_grads is not None:
        payload["point_gradients"] = [[float(a), float(b)] for a, b in result.point_grads]
    if corr is not None:
        payload["correlation"] = {
            "corr": None if corr.corr is None else float(corr.corr),
            "reliable": corr.reliable,
            "n_strokes": corr.n_strokes,
        }
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True)


def svg_overlay(sketch: VectorSketch, result: AttributionResult) -> str:
    """Strokes colored by normalized score; per-point dots for point granularity."""
    strokes = split_strokes(sketch)
    norm = _normalized(result.scores)
    if result.granularity == "point":
        from .attribution import stroke_scores_from_points

        stroke_norm = _normalized(stroke_scores_from_points(result, sketch))
    else:
        stroke_norm = norm

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{sketch.canvas_w}" '
        f'height="{sketch.canvas_h}" viewBox="0 0 {sketch.canvas_w} {sketch.canvas_h}">',
        f'<rect width="{sketch.canvas_w}" height="{sketch.canvas_h}" fill="white"/>',
    ]
    for i, stroke in enumerate(strokes):
        r, g, b = diverging_color(float(stroke_norm[i]))
        coords = " ".join(f"{p.x:.3f},{p.y:.3f}" for p in stroke.points)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="rgb({r},{g},{b})" '
            f'stroke-width="1.5" data-stroke="{i}" data-score="{float(norm[i]) if result.granularity == "stroke" else float(stroke_norm[i]):.6f}"/>'
        )
    if result.granularity == "point":
        for t, p in enumerate(sketch.points):
            if p.pen is PenState.END:
                continue
            r, g, b = diverging_color(float(norm[t]))
            parts.append(
                f'<circle cx="{p.x:.3f}" cy="{p.y:.3f}" r="1.2" fill="rgb({r},{g},{b})" '
                f'data-point="{t}" data-score="{float(norm[t]):.6f}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts)


def heatmap_png_bytes(grad: np.ndarray) -> bytes:
    """Diverging-scale PNG of a pixel gradient map, symmetric around zero."""
    from PIL import Image

    peak = float(np.abs(grad).max())
    norm = grad / peak if peak > 0 else np.zeros_like(grad)
    h, w = norm.shape
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    neg = np.array(_NEG, dtype=np.float64)
    mid = np.array(_MID, dtype=np.float64)
    pos = np.array(_POS, dtype=np.float64)
    t = norm[..., None]
    rgb_f = np.where(t < 0, neg + (t + 1.0) * (mid - neg), mid + t * (pos - mid))
    np.round(rgb_f, out=rgb_f)
    rgb[:] = rgb_f.astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def image_png_bytes(image: RasterImage) -> bytes:
    from .raster import png_bytes

    return png_bytes(image)
