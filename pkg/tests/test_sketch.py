"""Sketch model: parsing, validation, normalization, stroke splitting."""

import json
import math

import pytest
from hypothesis import given, settings

from strokescope.errors import SketchParseError, SketchValidationError
from strokescope.sketch import (
    PenState,
    Point,
    VectorSketch,
    iter_ndjson,
    normalize,
    parse_vector_sketch,
    serialize_sketch,
    split_strokes,
    stroke3_to_stroke5,
)
from conftest import sketch_strategy


def make(points, w=32, h=32):
    return VectorSketch(tuple(Point(x, y, pen) for x, y, pen in points), w, h)


D, U, E = PenState.DOWN, PenState.UP, PenState.END


class TestParsing:
    def test_stroke5_roundtrip_canonical(self):
        raw = '{"canvas":[32,32],"points":[[1.5,2.0,1,0,0],[3.25,2.0,1,0,0],[3.25,2.0,0,0,1]]}'
        sketch = parse_vector_sketch(raw)
        assert serialize_sketch(sketch) == raw

    def test_serialize_appends_end_marker(self):
        sketch = make([(1, 1, D), (2, 2, U)])
        obj = json.loads(serialize_sketch(sketch))
        assert obj["points"][-1][2:] == [0, 0, 1]
        assert obj["points"][-1][:2] == [2, 2]

    def test_stroke3_delta_conversion(self):
        sketch = stroke3_to_stroke5([(10, 10, 0), (5, 0, 1), (0, 5, 0)])
        assert [(p.x, p.y, p.pen) for p in sketch.points] == [
            (10.0, 10.0, D),
            (15.0, 10.0, U),
            (15.0, 15.0, D),
        ]

    def test_end_mid_sequence_rejected(self):
        raw = '{"points":[[0,0,1,0,0],[1,1,0,0,1],[2,2,1,0,0]]}'
        with pytest.raises(SketchValidationError):
            parse_vector_sketch(raw)

    def test_quickdraw_ndjson_two_strokes(self):
        line = '{"strokes":[[[0,5,10],[0,0,0]],[[0,5,10],[8,8,8]]]}'
        sketch = parse_vector_sketch(line, "stroke3-ndjson")
        assert sketch.n_points == 6
        strokes = split_strokes(sketch)
        assert [s.length_points for s in strokes] == [3, 3]
        assert [p.pen for p in sketch.points] == [D, D, U, D, D, U]
        assert (sketch.points[1].x, sketch.points[1].y) == (5.0, 0.0)

    def test_malformed_json_reports_byte_offset(self):
        with pytest.raises(SketchParseError) as exc:
            parse_vector_sketch('{"points": [[0, 0, 1, 0')
        assert exc.value.byte_offset is not None

    def test_pen_state_not_one_hot(self):
        with pytest.raises(SketchValidationError):
            parse_vector_sketch('{"points":[[0,0,1,1,0]]}')

    def test_empty_drawing(self):
        with pytest.raises(SketchValidationError):
            parse_vector_sketch('{"points":[]}')

    def test_no_pen_down_rejected(self):
        with pytest.raises(SketchValidationError):
            parse_vector_sketch('{"points":[[0,0,0,1,0]]}')

    def test_ndjson_iteration_with_labels(self):
        data = '{"strokes":[[[0,1],[0,1]]],"label":"cat"}\n{"strokes":[[[2,3],[2,3]]],"word":"dog"}\n'
        items = list(iter_ndjson(data))
        assert [label for _, label in items] == ["cat", "dog"]

    def test_ndjson_error_offset_is_file_relative(self):
        good = '{"strokes":[[[0,1],[0,1]]]}\n'
        with pytest.raises(SketchParseError) as exc:
            list(iter_ndjson(good + '{"strokes": [[[0'))
        assert exc.value.byte_offset >= len(good.encode())


class TestNormalize:
    def test_linear_map_with_margin(self):
        sketch = make([(0, 0, D), (100, 100, D)], w=200, h=200)
        out = normalize(sketch, 256, 256, margin=0.05)
        assert out.points[0].x == pytest.approx(12.8)
        assert out.points[0].y == pytest.approx(12.8)
        assert out.points[1].x == pytest.approx(243.2)
        assert out.points[1].y == pytest.approx(243.2)

    def test_idempotent(self):
        sketch = make([(3, 7, D), (20, 4, D), (11, 30, U)])
        once = normalize(sketch, 256, 256)
        twice = normalize(once, 256, 256)
        for a, b in zip(once.points, twice.points):
            assert math.isclose(a.x, b.x, abs_tol=1e-9)
            assert math.isclose(a.y, b.y, abs_tol=1e-9)

    def test_single_point_at_center(self):
        sketch = make([(5, 9, D)])
        out = normalize(sketch, 256, 256)
        assert (out.points[0].x, out.points[0].y) == (128.0, 128.0)

    def test_aspect_ratio_preserved(self):
        sketch = make([(0, 0, D), (100, 50, D)], w=200, h=200)
        out = normalize(sketch, 256, 256, margin=0.05)
        dx = out.points[1].x - out.points[0].x
        dy = out.points[1].y - out.points[0].y
        assert dx / dy == pytest.approx(2.0)

    def test_commutes_with_split(self):
        sketch = make([(1, 1, D), (9, 4, D), (5, 5, U), (2, 8, D), (7, 7, D)])
        normalized_then_split = split_strokes(normalize(sketch, 64, 64))
        split_then_normalized = split_strokes(sketch)
        assert [s.length_points for s in normalized_then_split] == [
            s.length_points for s in split_then_normalized
        ]


class TestSplitStrokes:
    def test_up_terminates_stroke(self):
        sketch = make([(0, 0, D), (1, 0, D), (2, 0, U), (3, 0, D), (4, 0, D), (4, 0, E)])
        strokes = split_strokes(sketch)
        assert [s.length_points for s in strokes] == [3, 2]
        assert strokes[0].points[-1].pen is U

    def test_single_stroke_whole_sketch(self):
        sketch = make([(0, 0, D), (1, 0, D), (2, 0, D)])
        strokes = split_strokes(sketch)
        assert len(strokes) == 1
        assert strokes[0].points == sketch.points

    def test_alternating(self):
        sketch = make([(0, 0, D), (1, 0, U), (2, 0, D), (3, 0, U)])
        assert [s.length_points for s in split_strokes(sketch)] == [2, 2]

    def test_stroke_lengths(self):
        sketch = make([(0, 0, D), (3, 4, D), (3, 4, U)])
        stroke = split_strokes(sketch)[0]
        assert stroke.length_points == 3
        assert stroke.length_px == pytest.approx(5.0)

    @given(sketch_strategy())
    @settings(max_examples=60, deadline=None)
    def test_split_merge_roundtrip(self, sketch):
        strokes = split_strokes(sketch)
        merged = [p for s in strokes for p in s.points]
        original = [p for p in sketch.points if p.pen is not PenState.END]
        assert merged == original
        starts = [s.start for s in strokes]
        assert starts == sorted(starts)

    @given(sketch_strategy(with_end=True))
    @settings(max_examples=30, deadline=None)
    def test_serialize_parse_roundtrip(self, sketch):
        again = parse_vector_sketch(serialize_sketch(sketch))
        assert [(p.x, p.y, p.pen) for p in again.points] == [
            (p.x, p.y, p.pen) for p in sketch.points
        ]
