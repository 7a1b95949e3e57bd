"""Downstream procedures built on the attribution engine.

* Noisy-stroke / noisy-point filtering for assisted drawing: attribute the
  cosine similarity between the drawn sketch and a target embedding, floor
  negative scores, normalise to a distribution, and keep whatever clears
  ``normalized score + delta >= 0.5`` (point shares are rebased against the
  uniform one first, since a drawing has far more points than strokes).  The
  default decision is the hard threshold; Gumbel sampling is available for
  parity with the stochastic formulation, and the top-ranked stroke (or the
  top point's segment) is never dropped so filtering cannot empty a drawing.

* Untargeted removal attacks on classifiers: delete the stroke within the
  point budget whose removal maximises the cross-entropy against the ground
  truth (exhaustive), or jointly delete the epsilon points with the highest
  leave-one-out loss.  Point attacks score and evaluate on the differentiable
  render by default, stroke attacks on the hard raster; a gradient-ranked fast
  path for points is available behind a flag.

* Retrieval reliability: correlate the attribution stroke order with the
  temporal drawing order and report the reliability flag next to the true
  match's retrieval rank.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .attribution import (
    AttributionResult,
    CorrReport,
    point_attribution,
    stroke_attribution,
    stroke_scores_from_points,
    temporal_correlation,
)
from .diffraster import RenderParams, pen_state_influence, soft_render
from .errors import BudgetError, NoCandidateError, ScorerError, SketchValidationError
from .raster import rasterise
from .scorers.base import Scorer, ScoreTarget
from .scorers.embedding import EmbeddingScorer
from .sketch import PenState, Point, VectorSketch, split_strokes

KEEP_THRESHOLD = 0.5
DEFAULT_STROKE_DELTA = 0.3
DEFAULT_POINT_DELTA = 0.1


@dataclass(frozen=True)
class FilterConfig:
    granularity: str = "stroke"  # "stroke" | "point"
    delta: float | None = None  # defaults to 0.3 for strokes, 0.1 for points
    gumbel_temperature: float = 1.0
    stochastic: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.granularity not in ("stroke", "point"):
            raise SketchValidationError(f"unknown filter granularity {self.granularity!r}")
        if self.delta is not None and not 0.0 <= self.delta < 0.5:
            raise SketchValidationError("delta must lie in [0, 0.5)")

    @property
    def effective_delta(self) -> float:
        if self.delta is not None:
            return self.delta
        return DEFAULT_STROKE_DELTA if self.granularity == "stroke" else DEFAULT_POINT_DELTA


@dataclass(frozen=True)
class AttackConfig:
    epsilon: int
    mode: str = "stroke"  # "stroke" removes one stroke, "point" removes epsilon points

    def __post_init__(self):
        if self.epsilon < 1:
            raise SketchValidationError("epsilon must be a positive integer")
        if self.mode not in ("stroke", "point"):
            raise SketchValidationError(f"unknown attack mode {self.mode!r}")


@dataclass(frozen=True)
class AttackOutcome:
    adversarial_sketch: VectorSketch
    removed: tuple[int, ...]  # stroke index (stroke mode) or point indices (point mode)
    pred_before: int
    pred_after: int
    success: bool
    mode: str


@dataclass(frozen=True)
class FilterReport:
    kept: tuple[int, ...]
    removed: tuple[int, ...]
    normalized_scores: np.ndarray
    delta: float


def _normalized_keep_scores(raw: np.ndarray) -> np.ndarray:
    """Floor negative attributions at zero and normalise to a distribution."""
    floored = np.maximum(raw, 0.0)
    total = floored.sum()
    if total <= 0.0:
        return np.full(len(raw), 1.0 / len(raw))
    return floored / total


def _keep_mask(norm: np.ndarray, cfg: FilterConfig, scale: float = 1.0) -> np.ndarray:
    """Keep rule over normalised scores; ``scale`` rebases the share.

    Strokes use the raw distribution share (scale 1).  Points use the share
    relative to the uniform one (scale = point count): a sketch has far more
    points than strokes, so the absolute share of even an essential point is
    tiny and the unscaled rule would disable every segment.
    """
    delta = cfg.effective_delta
    if not cfg.stochastic:
        return norm * scale + delta >= KEEP_THRESHOLD
    # Straight-through Gumbel decision per element over {keep, drop}.
    rng = np.random.default_rng(cfg.seed)
    p = np.clip(norm * scale + delta, 1e-6, 1.0 - 1e-6)
    g_keep = -np.log(-np.log(rng.uniform(size=len(norm))))
    g_drop = -np.log(-np.log(rng.uniform(size=len(norm))))
    soft = 1.0 / (1.0 + np.exp(-((np.log(p) - np.log(1.0 - p) + g_keep - g_drop) / cfg.gumbel_temperature)))
    return soft > 0.5


def _require_embedding(scorer: Scorer) -> EmbeddingScorer:
    if not isinstance(scorer, EmbeddingScorer):
        raise ScorerError(f"filtering needs an embedding scorer, got {scorer.kind!r}")
    return scorer


def filter_noisy_strokes(
    sketch: VectorSketch,
    scorer: Scorer,
    reference: np.ndarray,
    cfg: FilterConfig = FilterConfig("stroke"),
) -> tuple[VectorSketch, FilterReport]:
    """Drop strokes whose attribution against the reference falls below the keep rule."""
    _require_embedding(scorer)
    if cfg.granularity != "stroke":
        raise SketchValidationError("stroke filter called with a point config")
    result = stroke_attribution(scorer, ScoreTarget.cosine_sim(reference), sketch)
    norm = _normalized_keep_scores(result.scores)
    keep = _keep_mask(norm, cfg)
    keep[result.ranking[0]] = True  # never empty the sketch

    strokes = split_strokes(sketch)
    pts: list[Point] = []
    for i, stroke in enumerate(strokes):
        if keep[i]:
            pts.extend(stroke.points)
    if sketch.has_end:
        pts.append(sketch.points[-1])
    filtered = sketch.with_points(pts)
    report = FilterReport(
        kept=tuple(i for i in range(len(strokes)) if keep[i]),
        removed=tuple(i for i in range(len(strokes)) if not keep[i]),
        normalized_scores=norm,
        delta=cfg.effective_delta,
    )
    return filtered, report


def filter_noisy_points(
    sketch: VectorSketch,
    scorer: Scorer,
    reference: np.ndarray,
    cfg: FilterConfig = FilterConfig("point"),
    params: RenderParams = RenderParams(),
) -> VectorSketch:
    """Disable the incident segment of points that hurt the reference match.

    Each point is scored by the signed influence of keeping its incoming
    segment rendered (the derivative of the cosine similarity with respect to
    that segment's pen-down flag); negative-influence segments are the noise
    candidates.  A failing point's preceding pen state flips down -> up so the
    segment into it is no longer rendered; the end marker is never touched.
    Flipping can split strokes in two, which is the documented cost of
    point-level cleanup.
    """
    _require_embedding(scorer)
    if cfg.granularity != "point":
        raise SketchValidationError("point filter called with a stroke config")
    image = soft_render(sketch, params)
    grad = scorer.pixel_gradient(image, ScoreTarget.cosine_sim(reference))
    influence = pen_state_influence(sketch, params, grad)
    norm = _normalized_keep_scores(influence)
    # Shares rebased to the uniform one: a sketch has many points, so even an
    # essential segment holds only a small slice of the raw distribution.
    keep = _keep_mask(norm, cfg, scale=float(len(norm)))
    keep[int(np.argmax(influence))] = True

    pts = list(sketch.points)
    for t in range(1, len(pts)):
        if not keep[t] and pts[t - 1].pen is PenState.DOWN:
            pts[t - 1] = Point(pts[t - 1].x, pts[t - 1].y, PenState.UP)
    try:
        return sketch.with_points(pts)
    except SketchValidationError:
        return sketch  # nothing drawable would remain; refuse to empty


# ---------------------------------------------------------------------------
# Removal attacks
# ---------------------------------------------------------------------------

def _check_classifier(scorer: Scorer) -> None:
    if scorer.n_outputs < 2:
        raise ScorerError("attacks need a classifier with at least two classes")


def top_k_indices(scores, k: int) -> list[int]:
    """Indices of the k largest scores, ties broken by ascending index."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return order[:k]


def _sketch_without_stroke(sketch: VectorSketch, drop: int) -> VectorSketch:
    pts: list[Point] = []
    for i, stroke in enumerate(split_strokes(sketch)):
        if i != drop:
            pts.extend(stroke.points)
    if sketch.has_end:
        pts.append(sketch.points[-1])
    return sketch.with_points(pts)


def sla_attack(
    classifier: Scorer,
    sketch: VectorSketch,
    label: int,
    cfg: AttackConfig,
) -> AttackOutcome:
    """Remove the within-budget stroke that maximises the loss against ``label``.

    Every stroke with at most epsilon points is evaluated exhaustively on the
    hard raster; success means the prediction changed.
    """
    if cfg.mode != "stroke":
        raise SketchValidationError("stroke attack called with a point config")
    _check_classifier(classifier)
    strokes = split_strokes(sketch)
    if len(strokes) < 2:
        raise SketchValidationError("attack needs at least two strokes (removal would empty the sketch)")
    candidates = [i for i, s in enumerate(strokes) if s.length_points <= cfg.epsilon]
    if not candidates:
        raise NoCandidateError(f"no stroke within the budget of {cfg.epsilon} points")

    loss_target = ScoreTarget.class_loss(label)
    best_idx, best_loss, best_sketch = -1, -np.inf, sketch
    for j in candidates:
        candidate = _sketch_without_stroke(sketch, j)
        loss = classifier.score(rasterise(candidate), loss_target)
        if loss > best_loss:
            best_idx, best_loss, best_sketch = j, loss, candidate

    pred_before = classifier.predict(rasterise(sketch))
    pred_after = classifier.predict(rasterise(best_sketch))
    return AttackOutcome(
        adversarial_sketch=best_sketch,
        removed=(best_idx,),
        pred_before=pred_before,
        pred_after=pred_after,
        success=pred_after != pred_before,
        mode="stroke",
    )


def _delete_points(sketch: VectorSketch, indices: set[int]) -> VectorSketch | None:
    """Delete points and repair pen states; None if nothing drawable remains.

    Deleting a pen-up point hands its lift to the preceding pen-down point so
    the stroke stays terminated.
    """
    pts = list(sketch.points)
    for t in sorted(indices, reverse=True):
        removed = pts.pop(t)
        if removed.pen is PenState.UP and t - 1 >= 0 and pts[t - 1].pen is PenState.DOWN:
            pts[t - 1] = Point(pts[t - 1].x, pts[t - 1].y, PenState.UP)
    if not pts:
        return None
    drawable = any(
        pts[i].pen is PenState.DOWN and i + 1 < len(pts) for i in range(len(pts))
    )
    if not drawable:
        return None
    try:
        return sketch.with_points(pts)
    except SketchValidationError:
        return None


def psla_attack(
    classifier: Scorer,
    sketch: VectorSketch,
    label: int,
    cfg: AttackConfig,
    params: RenderParams = RenderParams(),
    renderer: str = "soft",
    gradient_ranking: bool = False,
) -> AttackOutcome:
    """Jointly remove the epsilon points with the highest leave-one-out loss.

    Exact mode re-renders the sketch once per candidate point; the
    ``gradient_ranking`` fast path ranks by point attribution magnitude
    instead.  ``renderer`` selects the image fed to the classifier (the
    differentiable render by default, matching the point pipeline).
    """
    if cfg.mode != "point":
        raise SketchValidationError("point attack called with a stroke config")
    _check_classifier(classifier)

    def render(s: VectorSketch):
        return soft_render(s, params) if renderer == "soft" else rasterise(s)

    eligible = [t for t, p in enumerate(sketch.points) if p.pen is not PenState.END]
    if len(eligible) <= cfg.epsilon:
        raise BudgetError(
            f"budget {cfg.epsilon} must be smaller than the {len(eligible)} removable points"
        )

    loss_target = ScoreTarget.class_loss(label)
    if gradient_ranking:
        result = point_attribution(classifier, loss_target, sketch, params)
        impact = {t: float(result.scores[t]) for t in eligible}
    else:
        impact = {}
        for t in eligible:
            candidate = _delete_points(sketch, {t})
            impact[t] = (
                -np.inf if candidate is None else classifier.score(render(candidate), loss_target)
            )

    ranked = top_k_indices([impact[t] for t in eligible], cfg.epsilon)
    chosen = [eligible[i] for i in ranked]
    adversarial = _delete_points(sketch, set(chosen))
    if adversarial is None:
        raise BudgetError("removal would leave no drawable segment")

    pred_before = classifier.predict(render(sketch))
    pred_after = classifier.predict(render(adversarial))
    return AttackOutcome(
        adversarial_sketch=adversarial,
        removed=tuple(sorted(chosen)),
        pred_before=pred_before,
        pred_after=pred_after,
        success=pred_after != pred_before,
        mode="point",
    )


# ---------------------------------------------------------------------------
# Retrieval reliability
# ---------------------------------------------------------------------------

def retrieval_reliability(
    sketch: VectorSketch,
    scorer: Scorer,
    gallery: np.ndarray,
    true_index: int | None = None,
    granularity: str = "stroke",
    params: RenderParams = RenderParams(),
) -> tuple[CorrReport, int | None]:
    """Reliability flag for a retrieval, plus the true match's rank if known.

    The gallery is a (G, dim) array of target embeddings.  Attribution runs
    against the top-retrieved embedding, since at inference time the true
    match is unknown.
    """
    embedder = _require_embedding(scorer)
    gallery = np.asarray(gallery, dtype=np.float64)
    if gallery.ndim != 2 or gallery.shape[0] == 0:
        raise ScorerError("gallery must be a non-empty (G, dim) array")
    query = embedder.embed(rasterise(sketch))
    sims = gallery @ query / np.maximum(np.linalg.norm(gallery, axis=1), 1e-12)
    order = np.argsort(-sims, kind="stable")
    rank = None
    if true_index is not None:
        rank = int(np.where(order == true_index)[0][0]) + 1

    target = ScoreTarget.cosine_sim(gallery[order[0]])
    if granularity == "stroke":
        ranking = stroke_attribution(embedder, target, sketch).ranking
    else:
        point_result = point_attribution(embedder, target, sketch, params)
        scores = stroke_scores_from_points(point_result, sketch)
        ranking = tuple(sorted(range(len(scores)), key=lambda i: (-scores[i], i)))
    return temporal_correlation(ranking, sketch), rank


# ---------------------------------------------------------------------------
# Desk-scale benchmark harnesses
# ---------------------------------------------------------------------------

def run_attack_benchmark(
    classifier: Scorer,
    sketches: list[VectorSketch],
    labels: np.ndarray,
    epsilons: tuple[int, ...] = (5, 15),
    modes: tuple[str, ...] = ("stroke", "point"),
    params: RenderParams = RenderParams(),
) -> tuple[dict, list[dict]]:
    """Accuracy before/after removal attacks; sketches without in-budget
    candidates count as unattacked."""
    rows: list[dict] = []
    summary: dict = {"n_sketches": len(sketches), "modes": {}}
    for mode in modes:
        def predict(s: VectorSketch) -> int:
            image = soft_render(s, params) if mode == "point" else rasterise(s)
            return classifier.predict(image)

        preds_before = np.array([predict(s) for s in sketches])
        acc_before = float((preds_before == labels).mean())
        mode_summary = {"accuracy_before": acc_before, "epsilons": {}}
        for eps in epsilons:
            cfg = AttackConfig(epsilon=eps, mode=mode)
            preds_after = preds_before.copy()
            attacked = 0
            for i, sketch in enumerate(sketches):
                try:
                    if mode == "stroke":
                        outcome = sla_attack(classifier, sketch, int(labels[i]), cfg)
                    else:
                        outcome = psla_attack(classifier, sketch, int(labels[i]), cfg, params)
                except (NoCandidateError, BudgetError, SketchValidationError):
                    rows.append(
                        {"sketch": i, "mode": mode, "epsilon": eps, "attacked": 0,
                         "pred_before": int(preds_before[i]), "pred_after": int(preds_before[i]),
                         "label": int(labels[i]), "removed": ""}
                    )
                    continue
                attacked += 1
                preds_after[i] = outcome.pred_after
                rows.append(
                    {"sketch": i, "mode": mode, "epsilon": eps, "attacked": 1,
                     "pred_before": outcome.pred_before, "pred_after": outcome.pred_after,
                     "label": int(labels[i]),
                     "removed": " ".join(str(r) for r in outcome.removed)}
                )
            acc_after = float((preds_after == labels).mean())
            mode_summary["epsilons"][str(eps)] = {
                "accuracy_after": acc_after,
                "accuracy_drop": acc_before - acc_after,
                "attacked": attacked,
            }
        summary["modes"][mode] = mode_summary
    return summary, rows


def attack_rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf,
        fieldnames=["sketch", "mode", "epsilon", "attacked", "label", "pred_before", "pred_after", "removed"],
        lineterminator="\n",
    )
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True)
