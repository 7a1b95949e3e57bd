"""Stroke and point attribution engine for human-drawn vector sketches.

Parses five-element vector sketches, rasterises them both non-differentiably
(Bresenham) and differentiably (soft-thresholded distance field), and pulls
pixel gradients from any differentiable scorer back to whole strokes or to
individual polyline points.  The attributions drive noisy-stroke filtering,
stroke/point removal attacks, and retrieval-reliability scoring, exposed
through a CLI and a local HTTP JSON service.
"""

from .attribution import (
    AttributionResult,
    CorrReport,
    kendall_tau,
    point_attribution,
    spearman_rho,
    stroke_attribution,
    stroke_scores_from_points,
    temporal_correlation,
)
from .applications import (
    AttackConfig,
    AttackOutcome,
    FilterConfig,
    FilterReport,
    filter_noisy_points,
    filter_noisy_strokes,
    psla_attack,
    retrieval_reliability,
    run_attack_benchmark,
    sla_attack,
)
from .diffraster import (
    DistanceField,
    RenderParams,
    min_distance_field,
    pen_state_influence,
    point_segment_distance,
    render_gradient,
    soft_render,
)
from .errors import (
    BudgetError,
    DimensionError,
    ModelFormatError,
    NoCandidateError,
    ScorerError,
    SketchParseError,
    SketchValidationError,
    StrokescopeError,
    TrainingError,
)
from .raster import (
    OffCanvasWarning,
    RasterImage,
    WeightMap,
    bresenham,
    compose,
    rasterise,
    rasterise_stroke,
    weight_map,
)
from .scorers import (
    EmbeddingScorer,
    LinearScorer,
    Scorer,
    ScoreTarget,
    TinyConvClassifier,
    load_model,
    save_model,
    train_embedding,
    train_tiny_classifier,
)
from .sketch import (
    PenState,
    Point,
    Stroke,
    VectorSketch,
    normalize,
    parse_vector_sketch,
    serialize_sketch,
    split_strokes,
    stroke3_to_stroke5,
)

__version__ = "0.1.0"
