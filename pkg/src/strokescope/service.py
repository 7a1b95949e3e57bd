"""Local HTTP JSON service exposing render / attribute / filter / attack / reliability.

Request bodies are job requests: ``{"operation": ..., "sketch": <stroke-5
object>, "model": <registry id or path>, "params": {...}}``; responses are
``{"status": "ok"|"error", "payload": {...}, "artifacts": [{name, media_type,
base64}]}``.  Models live in the directory named by ``STROKESCOPE_MODELS_DIR``
(or the ``--models-dir`` flag), are loaded once, and are shared read-only
across requests; per-request computation owns its data, so concurrent
requests need no locking beyond the registry itself.

Caps: sketch JSON above 1 MiB or above 5000 points is rejected with 413.
Long operations run synchronously under a configurable timeout (default 30 s).
"""

from __future__ import annotations

import base64
import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import viz
from .applications import (
    AttackConfig,
    FilterConfig,
    filter_noisy_points,
    filter_noisy_strokes,
    psla_attack,
    retrieval_reliability,
    sla_attack,
)
from .attribution import point_attribution, stroke_attribution, temporal_correlation
from .diffraster import RenderParams, soft_render
from .errors import (
    BudgetError,
    NoCandidateError,
    StrokescopeError,
)
from .raster import png_bytes, rasterise
from .scorers import ScoreTarget, load_model
from .scorers.embedding import EmbeddingScorer
from .sketch import VectorSketch, normalize
from .sketch import _sketch_from_stroke5_obj  # canonical wire format

MAX_SKETCH_BYTES = 1 << 20
MAX_POINTS = 5000
DEFAULT_TIMEOUT = 30.0
MODELS_DIR_ENV = "STROKESCOPE_MODELS_DIR"
MODEL_SUFFIX = ".ssm"


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"status": "error", "code": code, "message": message},
    )


class ModelRegistry:
    """Lazy, lock-guarded model cache over a directory of model files."""

    def __init__(self, models_dir: str | None):
        self.models_dir = Path(models_dir) if models_dir else None
        self._cache: dict[str, object] = {}
        self._lock = threading.Lock()

    def list_models(self) -> list[dict]:
        if self.models_dir is None or not self.models_dir.is_dir():
            return []
        out = []
        for path in sorted(self.models_dir.glob(f"*{MODEL_SUFFIX}")):
            try:
                scorer = self.get(path.stem)
            except ServiceError:
                continue
            out.append(
                {
                    "id": path.stem,
                    "kind": scorer.kind,
                    "input_dims": list(scorer.input_dims),
                    "n_outputs": scorer.n_outputs,
                }
            )
        return out

    def list_references(self) -> list[dict]:
        """Reference embeddings stored alongside models as ``*.ref.json``."""
        if self.models_dir is None or not self.models_dir.is_dir():
            return []
        out = []
        for path in sorted(self.models_dir.glob("*.ref.json")):
            try:
                obj = json.loads(path.read_text())
                out.append({"id": path.name[: -len(".ref.json")], "dim": len(obj["embedding"])})
            except (json.JSONDecodeError, KeyError, TypeError):
                continue
        return out

    def get_reference(self, ref_id: str) -> np.ndarray:
        if self.models_dir is not None:
            path = self.models_dir / f"{ref_id}.ref.json"
            if path.is_file():
                obj = json.loads(path.read_text())
                return np.asarray(obj["embedding"], dtype=np.float64)
        raise ServiceError(404, "reference_not_found", f"unknown reference {ref_id!r}")

    def get(self, name: str):
        with self._lock:
            if name in self._cache:
                return self._cache[name]
            path = Path(name)
            if not path.is_file() and self.models_dir is not None:
                for candidate in (
                    self.models_dir / name,
                    self.models_dir / f"{name}{MODEL_SUFFIX}",
                ):
                    if candidate.is_file():
                        path = candidate
                        break
            if not path.is_file():
                raise ServiceError(404, "model_not_found", f"unknown model {name!r}")
            try:
                scorer = load_model(path)
            except StrokescopeError as e:
                raise ServiceError(500, "model_load_failed", str(e)) from e
            self._cache[name] = scorer
            return scorer


def _sketch_to_obj(sketch: VectorSketch) -> dict:
    return {
        "canvas": [sketch.canvas_w, sketch.canvas_h],
        "points": [[p.x, p.y, *p.pen.one_hot] for p in sketch.points],
    }


def _parse_job_sketch(body: dict) -> VectorSketch:
    sketch_obj = body.get("sketch")
    if sketch_obj is None:
        raise ServiceError(400, "bad_request", 'job request is missing "sketch"')
    raw = json.dumps(sketch_obj, separators=(",", ":"))
    if len(raw.encode("utf-8")) > MAX_SKETCH_BYTES:
        raise ServiceError(413, "sketch_too_large", "sketch JSON exceeds 1 MiB")
    try:
        sketch = _sketch_from_stroke5_obj(sketch_obj)
    except StrokescopeError as e:
        raise ServiceError(400, "bad_request", str(e)) from e
    if sketch.n_points > MAX_POINTS:
        raise ServiceError(413, "sketch_too_large", f"sketch exceeds {MAX_POINTS} points")
    return sketch


def _target_from_params(
    params: dict, scorer, registry: ModelRegistry, work: VectorSketch | None = None
) -> ScoreTarget:
    spec = params.get("target", {"kind": "class_logit"})
    kind = spec.get("kind", "class_logit")
    if kind in ("class_logit", "class_loss"):
        c = spec.get("class")
        if c is None:
            if work is None:
                raise ServiceError(400, "bad_request", "classification target needs a class index")
            c = scorer.predict(rasterise(work))  # default: the predicted class
        return ScoreTarget.class_logit(int(c)) if kind == "class_logit" else ScoreTarget.class_loss(int(c))
    if kind == "cosine_sim":
        if "reference" in spec:
            return ScoreTarget.cosine_sim(np.asarray(spec["reference"], dtype=np.float64))
        if "reference_id" in spec:
            return ScoreTarget.cosine_sim(registry.get_reference(spec["reference_id"]))
        if "reference_sketch" in spec:
            ref_sketch = _sketch_from_stroke5_obj(spec["reference_sketch"])
            embedder = scorer
            if not isinstance(embedder, EmbeddingScorer):
                raise ServiceError(400, "bad_request", "cosine target needs an embedding model")
            h, w = embedder.input_dims
            return ScoreTarget.cosine_sim(embedder.embed(rasterise(normalize(ref_sketch, w, h))))
        raise ServiceError(400, "bad_request", "cosine target needs a reference")
    if kind == "embedding_sum":
        return ScoreTarget.embedding_sum()
    raise ServiceError(400, "bad_request", f"unknown target kind {kind!r}")


def _reference_from_params(params: dict, embedder, registry: ModelRegistry) -> np.ndarray:
    if "reference" in params:
        return np.asarray(params["reference"], dtype=np.float64)
    if "reference_id" in params:
        return registry.get_reference(params["reference_id"])
    if "reference_sketch" in params:
        ref_sketch = _sketch_from_stroke5_obj(params["reference_sketch"])
        h, w = embedder.input_dims
        return embedder.embed(rasterise(normalize(ref_sketch, w, h)))
    raise ServiceError(400, "bad_request", "filter needs a reference embedding or sketch")


def _maybe_normalized(sketch: VectorSketch, scorer, params: dict) -> VectorSketch:
    if not params.get("normalize", True):
        return sketch
    h, w = scorer.input_dims
    if (sketch.canvas_w, sketch.canvas_h) == (w, h):
        return sketch
    return normalize(sketch, w, h)


def _artifact(name: str, media_type: str, data: bytes) -> dict:
    return {"name": name, "media_type": media_type, "base64": base64.b64encode(data).decode("ascii")}


def create_app(models_dir: str | None = None, timeout: float = DEFAULT_TIMEOUT) -> FastAPI:
    registry = ModelRegistry(models_dir or os.environ.get(MODELS_DIR_ENV))
    app = FastAPI(title="strokescope", version="1")
    # Localhost tool: the drawing UI is served statically and calls across origins.
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    executor = ThreadPoolExecutor(max_workers=8)

    def run_op(expected_op: str, body: dict, handler) -> JSONResponse:
        op = body.get("operation")
        if op is not None and op != expected_op:
            raise ServiceError(400, "bad_request", f"operation {op!r} does not match endpoint {expected_op!r}")
        future = executor.submit(handler)
        try:
            payload, artifacts = future.result(timeout=timeout)
        except FutureTimeout:
            raise ServiceError(504, "timeout", f"operation exceeded {timeout:g}s")
        return JSONResponse({"status": "ok", "payload": payload, "artifacts": artifacts})

    async def read_body(request: Request) -> dict:
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError as e:
            raise ServiceError(400, "bad_request", f"malformed JSON: {e.msg}")
        if not isinstance(body, dict):
            raise ServiceError(400, "bad_request", "job request must be a JSON object")
        return body

    @app.exception_handler(ServiceError)
    async def _service_error(request, exc: ServiceError):
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(StrokescopeError)
    async def _engine_error(request, exc: StrokescopeError):
        if isinstance(exc, (NoCandidateError, BudgetError)):
            return _error_response(422, "no_candidate" if isinstance(exc, NoCandidateError) else "budget", str(exc))
        return _error_response(400, "bad_request", str(exc))

    @app.exception_handler(Exception)
    async def _internal_error(request, exc: Exception):
        return _error_response(500, "internal", f"{type(exc).__name__}: {exc}")

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    @app.get("/v1/models")
    async def models():
        return {"models": registry.list_models(), "references": registry.list_references()}

    @app.post("/v1/render")
    async def render(request: Request):
        body = await read_body(request)
        sketch = _parse_job_sketch(body)
        params = body.get("params") or {}

        def handler():
            mode = params.get("mode", "hard")
            if mode == "soft":
                rp = RenderParams(a=float(params.get("a", 2.0)), b=float(params.get("b", 5.0)))
                image = soft_render(sketch, rp)
            elif mode == "hard":
                image = rasterise(sketch)
            else:
                raise ServiceError(400, "bad_request", f"unknown render mode {mode!r}")
            payload = {"w": image.w, "h": image.h, "ink_pixels": image.ink_count()}
            return payload, [_artifact("render.png", "image/png", png_bytes(image))]

        return run_op("render", body, handler)

    @app.post("/v1/attribute")
    async def attribute(request: Request):
        body = await read_body(request)
        sketch = _parse_job_sketch(body)
        params = body.get("params") or {}
        if body.get("model") is None:
            raise ServiceError(400, "bad_request", "attribute needs a model")
        scorer = registry.get(body["model"])

        def handler():
            mode = params.get("mode", "sla")
            work = _maybe_normalized(sketch, scorer, params)
            target = _target_from_params(params, scorer, registry, work)
            if mode == "sla":
                result = stroke_attribution(scorer, target, work)
            elif mode == "psla":
                result = point_attribution(scorer, target, work)
            else:
                raise ServiceError(400, "bad_request", f"unknown attribution mode {mode!r}")
            if result.granularity == "stroke":
                ranking = result.ranking
            else:
                from .attribution import stroke_scores_from_points

                s = stroke_scores_from_points(result, work)
                ranking = tuple(sorted(range(len(s)), key=lambda i: (-s[i], i)))
            corr = temporal_correlation(ranking, work)
            payload = json.loads(viz.attribution_json(result, corr))
            artifacts = [
                _artifact("overlay.svg", "image/svg+xml", viz.svg_overlay(work, result).encode("utf-8")),
                _artifact("heatmap.png", "image/png", viz.heatmap_png_bytes(result.pixel_grad)),
            ]
            return payload, artifacts

        return run_op("attribute", body, handler)

    @app.post("/v1/filter")
    async def filter_endpoint(request: Request):
        body = await read_body(request)
        sketch = _parse_job_sketch(body)
        params = body.get("params") or {}
        if body.get("model") is None:
            raise ServiceError(400, "bad_request", "filter needs an embedding model")
        scorer = registry.get(body["model"])

        def handler():
            if not isinstance(scorer, EmbeddingScorer):
                raise ServiceError(400, "bad_request", "filter needs an embedding model")
            granularity = params.get("granularity", "stroke")
            cfg = FilterConfig(
                granularity=granularity,
                delta=params.get("delta"),
                gumbel_temperature=float(params.get("gumbel_temperature", 1.0)),
                stochastic=bool(params.get("stochastic", False)),
                seed=int(params.get("seed", 0)),
            )
            reference = _reference_from_params(params, scorer, registry)
            work = _maybe_normalized(sketch, scorer, params)
            if granularity == "stroke":
                filtered, report = filter_noisy_strokes(work, scorer, reference, cfg)
                payload = {
                    "kept": list(report.kept),
                    "removed": list(report.removed),
                    "normalized_scores": [float(s) for s in report.normalized_scores],
                    "delta": report.delta,
                    "sketch": _sketch_to_obj(filtered),
                }
            else:
                filtered = filter_noisy_points(work, scorer, reference, cfg)
                payload = {"delta": cfg.effective_delta, "sketch": _sketch_to_obj(filtered)}
            return payload, []

        return run_op("filter", body, handler)

    @app.post("/v1/attack")
    async def attack(request: Request):
        body = await read_body(request)
        sketch = _parse_job_sketch(body)
        params = body.get("params") or {}
        if body.get("model") is None:
            raise ServiceError(400, "bad_request", "attack needs a classifier model")
        scorer = registry.get(body["model"])

        def handler():
            mode = params.get("mode", "sla")
            cfg = AttackConfig(
                epsilon=int(params.get("epsilon", 5)),
                mode="stroke" if mode == "sla" else "point",
            )
            work = _maybe_normalized(sketch, scorer, params)
            label = params.get("label")
            if label is None:
                label = scorer.predict(rasterise(work))
            if cfg.mode == "stroke":
                outcome = sla_attack(scorer, work, int(label), cfg)
            else:
                outcome = psla_attack(scorer, work, int(label), cfg)
            payload = {
                "success": outcome.success,
                "removed": list(outcome.removed),
                "pred_before": outcome.pred_before,
                "pred_after": outcome.pred_after,
                "mode": outcome.mode,
                "label": int(label),
                "sketch": _sketch_to_obj(outcome.adversarial_sketch),
            }
            return payload, []

        return run_op("attack", body, handler)

    @app.post("/v1/reliability")
    async def reliability(request: Request):
        body = await read_body(request)
        sketch = _parse_job_sketch(body)
        params = body.get("params") or {}
        if body.get("model") is None:
            raise ServiceError(400, "bad_request", "reliability needs an embedding model")
        scorer = registry.get(body["model"])

        def handler():
            gallery = params.get("gallery")
            if gallery is None:
                raise ServiceError(400, "bad_request", "reliability needs a gallery of embeddings")
            work = _maybe_normalized(sketch, scorer, params)
            true_index = params.get("true_index")
            report, rank = retrieval_reliability(
                work,
                scorer,
                np.asarray(gallery, dtype=np.float64),
                true_index=None if true_index is None else int(true_index),
                granularity=params.get("granularity", "stroke"),
            )
            payload = {
                "corr": report.corr,
                "reliable": report.reliable,
                "n_strokes": report.n_strokes,
                "rank": rank,
            }
            return payload, []

        return run_op("reliability", body, handler)

    return app


def serve(host: str = "127.0.0.1", port: int = 8750, models_dir: str | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(models_dir), host=host, port=port, log_level="warning")
