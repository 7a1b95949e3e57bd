"""Five-element vector sketch model: parsing, normalization, stroke splitting.

A drawing is an ordered list of points ``(x, y, pen)`` on a ``canvas_w x canvas_h``
canvas.  The pen state is one-hot over three alternatives:

* ``DOWN``: the pen touches the paper at this point,
* ``UP``: the pen is lifted at this point (ends the current stroke),
* ``END``: end-of-drawing marker (optional, at most one, always last).

Two serialisations are supported:

* stroke-5 JSON: ``{"canvas": [W, H], "points": [[x, y, qd, qu, qe], ...]}``
* stroke-3 NDJSON: one drawing per line, ``{"strokes": [[[x...], [y...]], ...]}``
  with an implicit pen lift at the end of each coordinate run.  An optional
  ``"label"`` field carries a class name for corpus files.

Coordinates are real-valued; rasterisers round where needed.  All types are
immutable after construction and every operation returns a new value, so the
module is safe for concurrent use.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import SketchParseError, SketchValidationError

DEFAULT_CANVAS = (256, 256)
DEFAULT_MARGIN = 0.05


class PenState(Enum):
    DOWN = (1, 0, 0)
    UP = (0, 1, 0)
    END = (0, 0, 1)

    @property
    def one_hot(self) -> tuple[int, int, int]:
        return self.value

    @classmethod
    def from_one_hot(cls, q: Sequence[float]) -> "PenState":
        if len(q) != 3:
            raise SketchValidationError(f"pen state needs 3 flags, got {len(q)}")
        flags = []
        for v in q:
            if v == 0:
                flags.append(0)
            elif v == 1:
                flags.append(1)
            else:
                raise SketchValidationError(f"pen flag must be 0 or 1, got {v!r}")
        if sum(flags) != 1:
            raise SketchValidationError(f"pen state must be one-hot, got {tuple(q)}")
        return cls(tuple(flags))


@dataclass(frozen=True)
class Point:
    x: float
    y: float
    pen: PenState

    def moved(self, x: float, y: float) -> "Point":
        return Point(x, y, self.pen)


@dataclass(frozen=True)
class VectorSketch:
    """Ordered point sequence plus its canvas. Validates invariants on construction."""

    points: tuple[Point, ...]
    canvas_w: int = DEFAULT_CANVAS[0]
    canvas_h: int = DEFAULT_CANVAS[1]

    def __post_init__(self):
        if self.canvas_w <= 0 or self.canvas_h <= 0:
            raise SketchValidationError("canvas dimensions must be positive")
        if len(self.points) == 0:
            raise SketchValidationError("empty drawing")
        ends = [i for i, p in enumerate(self.points) if p.pen is PenState.END]
        if len(ends) > 1:
            raise SketchValidationError("more than one end-of-drawing point")
        if ends and ends[0] != len(self.points) - 1:
            raise SketchValidationError("end-of-drawing point must be last")
        if not any(p.pen is PenState.DOWN for p in self.points):
            raise SketchValidationError("drawing has no pen-down point")

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def has_end(self) -> bool:
        return self.points[-1].pen is PenState.END

    def coords(self) -> np.ndarray:
        """(T, 2) float64 array of x, y coordinates."""
        return np.array([(p.x, p.y) for p in self.points], dtype=np.float64)

    def down_flags(self) -> np.ndarray:
        """(T,) bool array, True where the pen touches the paper."""
        return np.array([p.pen is PenState.DOWN for p in self.points], dtype=bool)

    def with_points(self, points: Iterable[Point]) -> "VectorSketch":
        return VectorSketch(tuple(points), self.canvas_w, self.canvas_h)


@dataclass(frozen=True)
class Stroke:
    """Contiguous pen-down run of a sketch, ending at its pen-up point if any.

    ``index`` is the ordinal position in drawing order, ``start`` the offset of
    the first point within the parent sketch.
    """

    points: tuple[Point, ...]
    index: int
    start: int

    @property
    def length_points(self) -> int:
        return len(self.points)

    @property
    def length_px(self) -> float:
        total = 0.0
        for a, b in zip(self.points, self.points[1:]):
            total += math.hypot(b.x - a.x, b.y - a.y)
        return total


def split_strokes(sketch: VectorSketch) -> list[Stroke]:
    """Segment the sketch into strokes by cutting after every pen-up point.

    The end-of-drawing marker belongs to no stroke.  Concatenating the returned
    strokes in order reproduces the sketch's point sequence exactly (minus the
    end marker).
    """
    strokes: list[Stroke] = []
    run: list[Point] = []
    run_start = 0
    for i, p in enumerate(sketch.points):
        if p.pen is PenState.END:
            break
        if not run:
            run_start = i
        run.append(p)
        if p.pen is PenState.UP:
            strokes.append(Stroke(tuple(run), len(strokes), run_start))
            run = []
    if run:
        strokes.append(Stroke(tuple(run), len(strokes), run_start))
    return strokes


def normalize(
    sketch: VectorSketch,
    target_w: int = DEFAULT_CANVAS[0],
    target_h: int = DEFAULT_CANVAS[1],
    margin: float = DEFAULT_MARGIN,
) -> VectorSketch:
    """Affinely map the sketch so its bounding box fits the target canvas.

    The aspect ratio is preserved, the drawing is centred, and ``margin`` (a
    fraction of the target dimension) is left around the longer side.  A
    degenerate bounding box (single repeated position) maps to the canvas
    center.  Pen states are unchanged; idempotent up to float rounding.
    """
    if target_w <= 0 or target_h <= 0:
        raise SketchValidationError("target dimensions must be positive")
    drawn = [p for p in sketch.points if p.pen is not PenState.END]
    xs = [p.x for p in drawn]
    ys = [p.y for p in drawn]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    bw, bh = xmax - xmin, ymax - ymin

    if bw == 0.0 and bh == 0.0:
        cx, cy = target_w / 2.0, target_h / 2.0
        pts = [p.moved(cx, cy) for p in sketch.points]
        return VectorSketch(tuple(pts), target_w, target_h)

    sx = target_w * (1.0 - 2.0 * margin) / bw if bw > 0 else math.inf
    sy = target_h * (1.0 - 2.0 * margin) / bh if bh > 0 else math.inf
    s = min(sx, sy)
    # Center the scaled box; the tighter axis ends up with extra whitespace.
    ox = (target_w - s * bw) / 2.0
    oy = (target_h - s * bh) / 2.0
    pts = [p.moved(ox + s * (p.x - xmin), oy + s * (p.y - ymin)) for p in sketch.points]
    return VectorSketch(tuple(pts), target_w, target_h)


# ---------------------------------------------------------------------------
# Parsing and serialisation
# ---------------------------------------------------------------------------

def _as_text(data: bytes | str) -> str:
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SketchParseError("input is not valid UTF-8", e.start) from e
    return data


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _points_from_rows(rows: Sequence[Sequence[float]]) -> tuple[Point, ...]:
    pts = []
    for i, row in enumerate(rows):
        if len(row) != 5:
            raise SketchValidationError(f"point {i} has {len(row)} elements, expected 5")
        x, y = float(row[0]), float(row[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise SketchValidationError(f"point {i} has non-finite coordinates")
        pts.append(Point(x, y, PenState.from_one_hot(row[2:5])))
    return tuple(pts)


def _sketch_from_stroke5_obj(obj: object) -> VectorSketch:
    if not isinstance(obj, dict) or "points" not in obj:
        raise SketchValidationError('stroke-5 JSON must be an object with a "points" list')
    canvas = obj.get("canvas", DEFAULT_CANVAS)
    if (
        not isinstance(canvas, (list, tuple))
        or len(canvas) != 2
        or not all(isinstance(v, (int, float)) and v > 0 for v in canvas)
    ):
        raise SketchValidationError('"canvas" must be [W, H] with positive entries')
    return VectorSketch(_points_from_rows(obj["points"]), int(canvas[0]), int(canvas[1]))


def _sketch_from_quickdraw_obj(obj: object, canvas: tuple[int, int]) -> VectorSketch:
    if not isinstance(obj, dict) or "strokes" not in obj:
        raise SketchValidationError('stroke-3 NDJSON line must be an object with a "strokes" list')
    pts: list[Point] = []
    for si, stroke in enumerate(obj["strokes"]):
        if not isinstance(stroke, (list, tuple)) or len(stroke) != 2:
            raise SketchValidationError(f"stroke {si} must be an [xs, ys] pair")
        xs, ys = stroke
        if len(xs) != len(ys):
            raise SketchValidationError(f"stroke {si} has {len(xs)} xs but {len(ys)} ys")
        if len(xs) == 0:
            raise SketchValidationError(f"stroke {si} is empty")
        for j, (x, y) in enumerate(zip(xs, ys)):
            pen = PenState.UP if j == len(xs) - 1 else PenState.DOWN
            pts.append(Point(float(x), float(y), pen))
    return VectorSketch(tuple(pts), canvas[0], canvas[1])


def parse_vector_sketch(
    data: bytes | str,
    fmt: str = "stroke5-json",
    canvas: tuple[int, int] = DEFAULT_CANVAS,
) -> VectorSketch:
    """Parse one drawing. ``fmt`` is ``"stroke5-json"`` or ``"stroke3-ndjson"``.

    For NDJSON input the first non-empty line is parsed; use
    :func:`iter_ndjson` for whole corpus files.  ``canvas`` applies only to
    stroke-3 input, which carries no canvas of its own.
    """
    text = _as_text(data)
    if fmt == "stroke5-json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise SketchParseError(e.msg, _byte_offset(text, e.pos)) from e
        return _sketch_from_stroke5_obj(obj)
    if fmt == "stroke3-ndjson":
        offset = 0
        for line in text.splitlines(keepends=True):
            if line.strip():
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise SketchParseError(e.msg, offset + _byte_offset(line, e.pos)) from e
                return _sketch_from_quickdraw_obj(obj, canvas)
            offset += len(line.encode("utf-8"))
        raise SketchParseError("no drawing found in NDJSON input", 0)
    raise SketchParseError(f"unknown format {fmt!r}")


def iter_ndjson(
    data: bytes | str, canvas: tuple[int, int] = DEFAULT_CANVAS
) -> Iterator[tuple[VectorSketch, str | None]]:
    """Yield ``(sketch, label)`` for every non-empty line of a stroke-3 NDJSON corpus."""
    text = _as_text(data)
    offset = 0
    for line in text.splitlines(keepends=True):
        if line.strip():
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise SketchParseError(e.msg, offset + _byte_offset(line, e.pos)) from e
            label = obj.get("label", obj.get("word")) if isinstance(obj, dict) else None
            yield _sketch_from_quickdraw_obj(obj, canvas), label
        offset += len(line.encode("utf-8"))


def stroke3_to_stroke5(
    rows: Sequence[Sequence[float]],
    origin: tuple[float, float] = (0.0, 0.0),
    canvas: tuple[int, int] = DEFAULT_CANVAS,
) -> VectorSketch:
    """Convert stroke-3 triples ``(dx, dy, lift)`` to an absolute stroke-5 sketch.

    Coordinates are cumulative sums starting from ``origin``; a point whose
    lift flag is set becomes a pen-up point.  No end marker is inserted.
    """
    pts = []
    x, y = float(origin[0]), float(origin[1])
    for i, row in enumerate(rows):
        if len(row) != 3:
            raise SketchValidationError(f"stroke-3 row {i} has {len(row)} elements, expected 3")
        dx, dy, lift = row
        x += float(dx)
        y += float(dy)
        if lift not in (0, 1):
            raise SketchValidationError(f"stroke-3 lift flag must be 0 or 1, got {lift!r}")
        pts.append(Point(x, y, PenState.UP if lift else PenState.DOWN))
    return VectorSketch(tuple(pts), canvas[0], canvas[1])


def serialize_sketch(sketch: VectorSketch) -> str:
    """Canonical stroke-5 JSON. Appends an end marker (at the last position) if absent."""
    rows = [[p.x, p.y, *p.pen.one_hot] for p in sketch.points]
    if not sketch.has_end:
        last = sketch.points[-1]
        rows.append([last.x, last.y, *PenState.END.one_hot])
    return json.dumps(
        {"canvas": [sketch.canvas_w, sketch.canvas_h], "points": rows},
        separators=(",", ":"),
    )
