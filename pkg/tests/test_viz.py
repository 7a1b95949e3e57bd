"""Export formats: attribution JSON, SVG overlays, gradient heatmaps."""

import json

import numpy as np

from strokescope.attribution import stroke_attribution, point_attribution, temporal_correlation
from strokescope.scorers import LinearScorer, ScoreTarget
from strokescope.viz import attribution_json, diverging_color, heatmap_png_bytes, svg_overlay
from conftest import random_walk_sketch


def setup_result(granularity="stroke"):
    rng = np.random.default_rng(55)
    sketch = random_walk_sketch(rng, n_strokes=3)
    scorer = LinearScorer(rng.normal(size=(1, 48, 48)))
    target = ScoreTarget.class_logit(0)
    if granularity == "stroke":
        return sketch, stroke_attribution(scorer, target, sketch)
    return sketch, point_attribution(scorer, target, sketch)


class TestJson:
    def test_payload_fields(self):
        sketch, result = setup_result()
        corr = temporal_correlation(result.ranking, sketch)
        payload = json.loads(attribution_json(result, corr))
        assert payload["granularity"] == "stroke"
        assert len(payload["scores"]) == 3
        assert sorted(payload["ranking"]) == [0, 1, 2]
        assert payload["correlation"]["reliable"] in ("high", "mid", "low", "not_applicable")
        assert max(abs(s) for s in payload["normalized_scores"]) <= 1.0

    def test_point_payload_has_raw_gradients(self):
        sketch, result = setup_result("point")
        payload = json.loads(attribution_json(result))
        assert len(payload["point_gradients"]) == sketch.n_points

    def test_deterministic(self):
        _, result = setup_result()
        assert attribution_json(result) == attribution_json(result)


class TestSvg:
    def test_stroke_overlay_structure(self):
        sketch, result = setup_result()
        svg = svg_overlay(sketch, result)
        assert svg.startswith("<svg")
        assert svg.count("<polyline") == 3
        assert 'data-stroke="0"' in svg

    def test_point_overlay_has_dots(self):
        sketch, result = setup_result("point")
        svg = svg_overlay(sketch, result)
        assert svg.count("<circle") == sketch.n_points


class TestColors:
    def test_diverging_endpoints(self):
        assert diverging_color(-1.0) == (59, 76, 192)
        assert diverging_color(0.0) == (232, 232, 232)
        assert diverging_color(1.0) == (180, 4, 38)

    def test_heatmap_png(self):
        grad = np.linspace(-1, 1, 48 * 48).reshape(48, 48)
        data = heatmap_png_bytes(grad)
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
        assert data == heatmap_png_bytes(grad)
