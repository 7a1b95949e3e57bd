"""Command-line front end: render | attribute | filter | attack | reliability | train | serve.

Sketches are stroke-5 JSON files ("-" reads stdin); ``--format stroke3-ndjson``
accepts QuickDraw-style lines.  Models resolve against the path given, then
against ``STROKESCOPE_MODELS_DIR``.  Exit codes: 0 success, 1 operational
error, 2 usage error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

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
from .attribution import (
    point_attribution,
    stroke_attribution,
    stroke_scores_from_points,
    temporal_correlation,
)
from .diffraster import RenderParams, soft_render
from .errors import StrokescopeError
from .raster import pgm_bytes, png_bytes, rasterise
from .scorers import ScoreTarget, load_model, save_model
from .scorers.embedding import EmbeddingScorer
from .service import MODELS_DIR_ENV, MODEL_SUFFIX
from .sketch import VectorSketch, normalize, parse_vector_sketch, serialize_sketch

_EXIT_OPERATIONAL = 1


class _Fail(click.ClickException):
    exit_code = _EXIT_OPERATIONAL


def _read_sketch(path: str, fmt: str) -> VectorSketch:
    data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    return parse_vector_sketch(data, fmt)


def _resolve_model(name: str):
    path = Path(name)
    if not path.is_file():
        models_dir = os.environ.get(MODELS_DIR_ENV)
        if models_dir:
            for candidate in (Path(models_dir) / name, Path(models_dir) / f"{name}{MODEL_SUFFIX}"):
                if candidate.is_file():
                    path = candidate
                    break
    if not path.is_file():
        raise _Fail(f"model file not found: {name}")
    return load_model(path)


def _load_reference(scorer, ref_path: str) -> np.ndarray:
    """A reference is either a JSON embedding vector or a stroke-5 sketch to embed."""
    obj = json.loads(Path(ref_path).read_text())
    if isinstance(obj, list):
        return np.asarray(obj, dtype=np.float64)
    if not isinstance(scorer, EmbeddingScorer):
        raise _Fail("embedding a reference sketch needs an embedding model")
    from .sketch import _sketch_from_stroke5_obj

    h, w = scorer.input_dims
    return scorer.embed(rasterise(normalize(_sketch_from_stroke5_obj(obj), w, h)))


def _parse_target(spec: str, scorer, reference: str | None, sketch=None) -> ScoreTarget:
    if spec == "predicted":
        if sketch is None:
            raise click.UsageError("--target predicted needs a sketch")
        return ScoreTarget.class_logit(scorer.predict(rasterise(sketch)))
    if spec.startswith("class:"):
        return ScoreTarget.class_logit(int(spec.split(":", 1)[1]))
    if spec.startswith("loss:"):
        return ScoreTarget.class_loss(int(spec.split(":", 1)[1]))
    if spec == "embsum":
        return ScoreTarget.embedding_sum()
    if spec == "cosine":
        if reference is None:
            raise click.UsageError("--target cosine needs --reference")
        return ScoreTarget.cosine_sim(_load_reference(scorer, reference))
    raise click.UsageError(f"unknown target {spec!r} (use predicted, class:N, loss:N, cosine, embsum)")


def _fit_to_model(sketch: VectorSketch, scorer, no_normalize: bool) -> VectorSketch:
    if no_normalize:
        return sketch
    h, w = scorer.input_dims
    if (sketch.canvas_w, sketch.canvas_h) == (w, h):
        return sketch
    return normalize(sketch, w, h)


def _write_artifacts(outdir: str | None, artifacts: dict[str, bytes]) -> None:
    if outdir is None:
        return
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, data in artifacts.items():
        (out / name).write_bytes(data)


@click.group()
def main():
    """Stroke attribution engine for vector sketches."""


@main.command()
@click.argument("sketch_file")
@click.option("--format", "fmt", default="stroke5-json", show_default=True)
@click.option("--mode", default="hard", type=click.Choice(["hard", "soft"]), show_default=True)
@click.option("--a", "a_param", default=2.0, show_default=True, help="Soft-render offset.")
@click.option("--b", "b_param", default=5.0, show_default=True, help="Soft-render slope.")
@click.option("-o", "--out", "outdir", required=True, help="Output directory.")
@click.option("--pgm", is_flag=True, help="Also write a bit-exact PGM.")
def render(sketch_file, fmt, mode, a_param, b_param, outdir, pgm):
    """Rasterise a sketch to render.png."""
    sketch = _read_sketch(sketch_file, fmt)
    if mode == "soft":
        image = soft_render(sketch, RenderParams(a=a_param, b=b_param))
    else:
        image = rasterise(sketch)
    artifacts = {"render.png": png_bytes(image)}
    if pgm:
        artifacts["render.pgm"] = pgm_bytes(image)
    _write_artifacts(outdir, artifacts)
    click.echo(json.dumps({"w": image.w, "h": image.h, "ink_pixels": image.ink_count()}))


@main.command()
@click.argument("sketch_file")
@click.option("--format", "fmt", default="stroke5-json", show_default=True)
@click.option("--mode", default="sla", type=click.Choice(["sla", "psla"]), show_default=True)
@click.option("--model", required=True)
@click.option("--target", default="predicted", show_default=True,
              help="predicted, class:N, loss:N, cosine, or embsum.")
@click.option("--reference", default=None, help="Reference embedding JSON or sketch for cosine targets.")
@click.option("--no-normalize", is_flag=True, help="Do not fit the sketch to the model canvas.")
@click.option("-o", "--out", "outdir", default=None)
def attribute(sketch_file, fmt, mode, model, target, reference, no_normalize, outdir):
    """Attribute a scorer's output to strokes (sla) or points (psla)."""
    scorer = _resolve_model(model)
    sketch = _fit_to_model(_read_sketch(sketch_file, fmt), scorer, no_normalize)
    tgt = _parse_target(target, scorer, reference, sketch)
    if mode == "sla":
        result = stroke_attribution(scorer, tgt, sketch)
        ranking = result.ranking
    else:
        result = point_attribution(scorer, tgt, sketch)
        s = stroke_scores_from_points(result, sketch)
        ranking = tuple(sorted(range(len(s)), key=lambda i: (-s[i], i)))
    corr = temporal_correlation(ranking, sketch)
    payload = viz.attribution_json(result, corr)
    _write_artifacts(
        outdir,
        {
            "scores.json": payload.encode("utf-8"),
            "overlay.svg": viz.svg_overlay(sketch, result).encode("utf-8"),
            "heatmap.png": viz.heatmap_png_bytes(result.pixel_grad),
        },
    )
    click.echo(payload)


@main.command("filter")
@click.argument("sketch_file")
@click.option("--format", "fmt", default="stroke5-json", show_default=True)
@click.option("--granularity", default="stroke", type=click.Choice(["stroke", "point"]), show_default=True)
@click.option("--model", required=True, help="Embedding model.")
@click.option("--reference", required=True, help="Reference embedding JSON or sketch.")
@click.option("--delta", default=None, type=float, help="Keep slack (default 0.3 stroke / 0.1 point).")
@click.option("--stochastic", is_flag=True, help="Gumbel sampling instead of the hard threshold.")
@click.option("--seed", default=0, show_default=True)
@click.option("--no-normalize", is_flag=True)
@click.option("-o", "--out", "outdir", default=None)
def filter_cmd(sketch_file, fmt, granularity, model, reference, delta, stochastic, seed, no_normalize, outdir):
    """Remove noisy strokes or points judged against a target embedding."""
    scorer = _resolve_model(model)
    sketch = _fit_to_model(_read_sketch(sketch_file, fmt), scorer, no_normalize)
    ref = _load_reference(scorer, reference)
    cfg = FilterConfig(granularity=granularity, delta=delta, stochastic=stochastic, seed=seed)
    if granularity == "stroke":
        filtered, report = filter_noisy_strokes(sketch, scorer, ref, cfg)
        payload = json.dumps(
            {
                "kept": list(report.kept),
                "removed": list(report.removed),
                "normalized_scores": [float(s) for s in report.normalized_scores],
                "delta": report.delta,
            },
            indent=2,
        )
    else:
        filtered = filter_noisy_points(sketch, scorer, ref, cfg)
        payload = json.dumps({"delta": cfg.effective_delta, "n_points": filtered.n_points}, indent=2)
    _write_artifacts(
        outdir,
        {"filtered.json": serialize_sketch(filtered).encode("utf-8"), "report.json": payload.encode("utf-8")},
    )
    click.echo(payload)


@main.command()
@click.argument("sketch_file")
@click.option("--format", "fmt", default="stroke5-json", show_default=True)
@click.option("--mode", default="sla", type=click.Choice(["sla", "psla"]), show_default=True)
@click.option("--epsilon", default=5, show_default=True, help="Point budget.")
@click.option("--model", required=True, help="Classifier model.")
@click.option("--label", default=None, type=int, help="Ground-truth class (defaults to the prediction).")
@click.option("--no-normalize", is_flag=True)
@click.option("-o", "--out", "outdir", default=None)
def attack(sketch_file, fmt, mode, epsilon, model, label, no_normalize, outdir):
    """Untargeted removal attack within a point budget."""
    scorer = _resolve_model(model)
    sketch = _fit_to_model(_read_sketch(sketch_file, fmt), scorer, no_normalize)
    if label is None:
        label = scorer.predict(rasterise(sketch))
    cfg = AttackConfig(epsilon=epsilon, mode="stroke" if mode == "sla" else "point")
    if cfg.mode == "stroke":
        outcome = sla_attack(scorer, sketch, label, cfg)
    else:
        outcome = psla_attack(scorer, sketch, label, cfg)
    payload = json.dumps(
        {
            "success": outcome.success,
            "removed": list(outcome.removed),
            "pred_before": outcome.pred_before,
            "pred_after": outcome.pred_after,
            "label": int(label),
            "mode": outcome.mode,
        },
        indent=2,
    )
    _write_artifacts(
        outdir,
        {
            "attack.json": payload.encode("utf-8"),
            "adversarial.json": serialize_sketch(outcome.adversarial_sketch).encode("utf-8"),
        },
    )
    click.echo(payload)


@main.command()
@click.argument("sketch_file")
@click.option("--format", "fmt", default="stroke5-json", show_default=True)
@click.option("--model", required=True, help="Embedding model.")
@click.option("--gallery", required=True, help="File with one stroke-5 JSON sketch per line.")
@click.option("--true-index", default=None, type=int)
@click.option("--granularity", default="stroke", type=click.Choice(["stroke", "point"]), show_default=True)
@click.option("--no-normalize", is_flag=True)
def reliability(sketch_file, fmt, model, gallery, true_index, granularity, no_normalize):
    """Reliability flag (attribution vs drawing order) plus the true match's rank."""
    scorer = _resolve_model(model)
    if not isinstance(scorer, EmbeddingScorer):
        raise _Fail("reliability needs an embedding model")
    sketch = _fit_to_model(_read_sketch(sketch_file, fmt), scorer, no_normalize)
    h, w = scorer.input_dims
    embeddings = []
    for line in Path(gallery).read_text().splitlines():
        if line.strip():
            item = parse_vector_sketch(line, "stroke5-json")
            embeddings.append(scorer.embed(rasterise(normalize(item, w, h))))
    if not embeddings:
        raise _Fail(f"gallery {gallery} holds no sketches")
    report, rank = retrieval_reliability(
        sketch, scorer, np.stack(embeddings), true_index=true_index, granularity=granularity
    )
    click.echo(
        json.dumps(
            {"corr": report.corr, "reliable": report.reliable, "n_strokes": report.n_strokes, "rank": rank},
            indent=2,
        )
    )


@main.command()
@click.option("--kind", default="conv", type=click.Choice(["conv", "embedding"]), show_default=True)
@click.option("--corpus", default=None, help="Labeled stroke-3 NDJSON (synthetic shapes when omitted).")
@click.option("--out", "out_path", required=True, help="Model file to write.")
@click.option("--seed", default=0, show_default=True)
@click.option("--epochs", default=None, type=int)
@click.option("--per-class", default=200, show_default=True, help="Synthetic examples per class.")
@click.option("--canvas", default=48, show_default=True)
@click.option("--report", "report_path", default=None, help="Write the training report JSON here.")
def train(kind, corpus, out_path, seed, epochs, per_class, canvas, report_path):
    """Train a scorer on a labeled corpus or the synthetic shape set."""
    from .scorers.convnet import TrainConfig, train_sketch_classifier
    from .scorers.corpus import (
        load_labeled_ndjson,
        make_classification_corpus,
        make_filtering_triplets,
    )
    from .scorers.embedding import EmbedTrainConfig, train_embedding_triplets

    if kind == "conv":
        if corpus:
            sketches, labels, class_names = load_labeled_ndjson(Path(corpus).read_bytes(), canvas)
        else:
            sketches, labels = make_classification_corpus(per_class, seed=seed, canvas=canvas)
            class_names = None
        cfg = TrainConfig(epochs=epochs or 12, seed=seed, val_fraction=0.15)
        model, report = train_sketch_classifier(sketches, labels, cfg)
        if class_names:
            report["classes"] = class_names
    else:
        anchors, positives, negatives = make_filtering_triplets(per_class * 3, seed=seed, canvas=canvas)
        cfg = EmbedTrainConfig(epochs=epochs or 20, seed=seed)
        model = train_embedding_triplets(anchors, positives, negatives, cfg)
        report = {"n_triplets": int(anchors.shape[0]), "epochs": cfg.epochs, "seed": seed}
    save_model(model, out_path)
    payload = json.dumps(report, indent=2, sort_keys=True)
    if report_path:
        Path(report_path).write_text(payload)
    click.echo(payload)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8750, show_default=True)
@click.option("--models-dir", default=None, help=f"Defaults to ${MODELS_DIR_ENV}.")
def serve(host, port, models_dir):
    """Run the local HTTP JSON service."""
    from .service import serve as run_service

    run_service(host=host, port=port, models_dir=models_dir)


def _main() -> int:
    try:
        main.main(standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 2
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except (StrokescopeError, FileNotFoundError, json.JSONDecodeError) as e:
        click.echo(f"error: {e}", err=True)
        return _EXIT_OPERATIONAL
    except click.exceptions.Abort:
        return 2
    return 0


def entrypoint():
    sys.exit(_main())


if __name__ == "__main__":
    sys.exit(_main())
