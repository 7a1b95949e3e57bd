"""HTTP JSON service: endpoints, error codes, caps, determinism."""

import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from strokescope.raster import rasterise
from strokescope.scorers.corpus import make_classification_corpus
from strokescope.service import create_app
from strokescope.sketch import serialize_sketch


@pytest.fixture(scope="module")
def client(models_dir):
    return TestClient(create_app(models_dir=str(models_dir)), raise_server_exceptions=False)


@pytest.fixture(scope="module")
def sketch_obj():
    sketches, _ = make_classification_corpus(2, seed=15)
    return json.loads(serialize_sketch(sketches[0]))


class TestBasics:
    def test_health(self, client):
        res = client.get("/health")
        assert res.status_code == 200
        assert res.json() == {"status": "ok"}

    def test_models_listing(self, client):
        res = client.get("/v1/models")
        assert res.status_code == 200
        ids = {m["id"] for m in res.json()["models"]}
        assert {"clf", "embed"} <= ids
        kinds = {m["id"]: m["kind"] for m in res.json()["models"]}
        assert kinds["clf"] == "conv_classifier"
        assert kinds["embed"] == "embedding"

    def test_malformed_json_400(self, client):
        res = client.post("/v1/render", content=b"{not json")
        assert res.status_code == 400
        assert res.json()["code"] == "bad_request"

    def test_unknown_model_404(self, client, sketch_obj):
        res = client.post("/v1/attribute", json={"sketch": sketch_obj, "model": "nope"})
        assert res.status_code == 404

    def test_operation_mismatch_400(self, client, sketch_obj):
        res = client.post("/v1/render", json={"operation": "attack", "sketch": sketch_obj})
        assert res.status_code == 400

    def test_point_cap_413(self, client):
        points = [[float(i % 40), float(i % 40), 1, 0, 0] for i in range(5001)]
        res = client.post("/v1/render", json={"sketch": {"canvas": [48, 48], "points": points}})
        assert res.status_code == 413

    def test_size_cap_413(self, client):
        # ~1.2 MiB of sketch JSON via long float digits
        points = [[i + 0.123456789012345, i + 0.98765432109876, 1, 0, 0] for i in range(22000)]
        res = client.post("/v1/render", json={"sketch": {"canvas": [48, 48], "points": points}})
        assert res.status_code == 413


class TestRender:
    def test_png_dims_match_canvas(self, client, sketch_obj):
        import io
        from PIL import Image

        res = client.post("/v1/render", json={"sketch": sketch_obj})
        assert res.status_code == 200
        body = res.json()
        assert body["status"] == "ok"
        art = body["artifacts"][0]
        assert art["media_type"] == "image/png"
        img = Image.open(io.BytesIO(base64.b64decode(art["base64"])))
        assert img.size == tuple(sketch_obj["canvas"])

    def test_soft_mode(self, client, sketch_obj):
        res = client.post("/v1/render", json={"sketch": sketch_obj, "params": {"mode": "soft"}})
        assert res.status_code == 200

    def test_deterministic_bytes(self, client, sketch_obj):
        req = {"sketch": sketch_obj, "params": {"mode": "hard"}}
        a = client.post("/v1/render", json=req)
        b = client.post("/v1/render", json=req)
        assert a.content == b.content


class TestAttribute:
    def test_point_scores_length(self, client, sketch_obj):
        res = client.post(
            "/v1/attribute",
            json={
                "sketch": sketch_obj,
                "model": "clf",
                "params": {"mode": "psla", "target": {"kind": "class_logit", "class": 0}},
            },
        )
        assert res.status_code == 200, res.text
        payload = res.json()["payload"]
        # normalization preserves point count; the end marker stays a point
        assert len(payload["scores"]) == len(sketch_obj["points"])
        assert payload["granularity"] == "point"

    def test_stroke_mode_with_correlation(self, client, sketch_obj):
        res = client.post(
            "/v1/attribute",
            json={
                "sketch": sketch_obj,
                "model": "clf",
                "params": {"mode": "sla", "target": {"kind": "class_loss", "class": 1}},
            },
        )
        assert res.status_code == 200
        payload = res.json()["payload"]
        assert payload["correlation"]["reliable"] in ("high", "mid", "low", "not_applicable")
        names = {a["name"] for a in res.json()["artifacts"]}
        assert names == {"overlay.svg", "heatmap.png"}

    def test_reference_sketch_target(self, client, sketch_obj):
        res = client.post(
            "/v1/attribute",
            json={
                "sketch": sketch_obj,
                "model": "embed",
                "params": {"mode": "sla", "target": {"kind": "cosine_sim", "reference_sketch": sketch_obj}},
            },
        )
        assert res.status_code == 200, res.text

    def test_deterministic(self, client, sketch_obj):
        req = {
            "sketch": sketch_obj,
            "model": "clf",
            "params": {"mode": "sla", "target": {"kind": "class_logit", "class": 2}},
        }
        assert client.post("/v1/attribute", json=req).content == client.post("/v1/attribute", json=req).content


class TestFilterAttackReliability:
    def test_filter_returns_valid_sketch(self, client, sketch_obj):
        res = client.post(
            "/v1/filter",
            json={
                "sketch": sketch_obj,
                "model": "embed",
                "params": {"granularity": "stroke", "reference_sketch": sketch_obj},
            },
        )
        assert res.status_code == 200, res.text
        payload = res.json()["payload"]
        assert payload["kept"], "top stroke always survives"
        from strokescope.sketch import _sketch_from_stroke5_obj

        _sketch_from_stroke5_obj(payload["sketch"])  # parses and validates

    def test_filter_needs_embedding_model(self, client, sketch_obj):
        res = client.post(
            "/v1/filter",
            json={"sketch": sketch_obj, "model": "clf", "params": {"reference": [0.0] * 32}},
        )
        assert res.status_code == 400

    def test_attack_endpoint(self, client, sketch_obj):
        res = client.post(
            "/v1/attack",
            json={"sketch": sketch_obj, "model": "clf", "params": {"mode": "psla", "epsilon": 5}},
        )
        assert res.status_code == 200, res.text
        payload = res.json()["payload"]
        assert len(payload["removed"]) == 5
        assert isinstance(payload["success"], bool)

    def test_attack_budget_error_422(self, client):
        tiny = {"canvas": [48, 48], "points": [[1, 1, 1, 0, 0], [5, 5, 1, 0, 0]]}
        res = client.post(
            "/v1/attack",
            json={"sketch": tiny, "model": "clf", "params": {"mode": "psla", "epsilon": 5}},
        )
        assert res.status_code == 422

    def test_reliability_endpoint(self, client, sketch_obj):
        rng = np.random.default_rng(3)
        gallery = rng.normal(size=(4, 32))
        gallery /= np.linalg.norm(gallery, axis=1, keepdims=True)
        res = client.post(
            "/v1/reliability",
            json={
                "sketch": sketch_obj,
                "model": "embed",
                "params": {"gallery": gallery.tolist(), "true_index": 2},
            },
        )
        assert res.status_code == 200, res.text
        payload = res.json()["payload"]
        assert 1 <= payload["rank"] <= 4

    def test_concurrent_requests(self, client, sketch_obj):
        import concurrent.futures

        req = {"sketch": sketch_obj, "params": {"mode": "hard"}}
        with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(lambda _: client.post("/v1/render", json=req).content, range(8)))
        assert all(r == results[0] for r in results)
