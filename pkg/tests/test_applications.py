"""Filtering, removal attacks, retrieval reliability, benchmark plumbing."""

import numpy as np
import pytest

from strokescope.applications import (
    AttackConfig,
    FilterConfig,
    _keep_mask,
    _normalized_keep_scores,
    attack_rows_csv,
    filter_noisy_points,
    filter_noisy_strokes,
    psla_attack,
    retrieval_reliability,
    run_attack_benchmark,
    sla_attack,
    summary_json,
    top_k_indices,
)
from strokescope.errors import (
    BudgetError,
    NoCandidateError,
    ScorerError,
    SketchValidationError,
)
from strokescope.raster import rasterise, stroke_images_and_weights
from strokescope.scorers import LinearScorer, ScoreTarget
from strokescope.scorers.corpus import add_noise_strokes, make_paired_corpus
from strokescope.sketch import PenState, Point, VectorSketch, split_strokes
from conftest import random_walk_sketch

D, U = PenState.DOWN, PenState.UP
HW = 48


def make(points, w=HW, h=HW):
    return VectorSketch(tuple(Point(x, y, pen) for x, y, pen in points), w, h)


class TestKeepRule:
    def test_uniform_two_strokes_both_kept(self):
        norm = _normalized_keep_scores(np.array([1.0, 1.0]))
        keep = _keep_mask(norm, FilterConfig("stroke", delta=0.3))
        assert keep.all()

    def test_delta_049_uniform_ten_all_kept(self):
        norm = _normalized_keep_scores(np.ones(10))
        keep = _keep_mask(norm, FilterConfig("stroke", delta=0.49))
        assert keep.all()

    def test_boundary_identity_delta_half_minus_inv_m(self):
        for m in (2, 3, 5, 8, 20):
            norm = _normalized_keep_scores(np.ones(m))
            keep = _keep_mask(norm, FilterConfig("stroke", delta=0.5 - 1.0 / m))
            assert keep.all()

    def test_negative_scores_floored(self):
        norm = _normalized_keep_scores(np.array([-5.0, 1.0]))
        assert norm.tolist() == [0.0, 1.0]

    def test_all_nonpositive_normalizes_uniform(self):
        norm = _normalized_keep_scores(np.array([-1.0, -2.0, 0.0]))
        assert np.allclose(norm, 1.0 / 3.0)

    def test_delta_validation(self):
        with pytest.raises(SketchValidationError):
            FilterConfig("stroke", delta=0.5)
        with pytest.raises(SketchValidationError):
            FilterConfig("stroke", delta=-0.1)

    def test_defaults_per_granularity(self):
        assert FilterConfig("stroke").effective_delta == 0.3
        assert FilterConfig("point").effective_delta == 0.1

    def test_stochastic_deterministic_given_seed(self):
        norm = _normalized_keep_scores(np.array([0.5, 0.3, 0.2, 0.0]))
        cfg = FilterConfig("stroke", delta=0.1, stochastic=True, seed=42)
        a = _keep_mask(norm, cfg)
        b = _keep_mask(norm, cfg)
        assert np.array_equal(a, b)


class TestStrokeFilter:
    def test_requires_embedding_scorer(self, linear_scorer):
        sketch = make([(2, 2, D), (9, 9, D)])
        with pytest.raises(ScorerError):
            filter_noisy_strokes(sketch, linear_scorer, np.ones(3))

    def test_never_empties(self, toy_embedder):
        rng = np.random.default_rng(0)
        sketch = random_walk_sketch(rng, n_strokes=3)
        ref = toy_embedder.embed(rasterise(random_walk_sketch(rng, n_strokes=2)))
        filtered, report = filter_noisy_strokes(sketch, toy_embedder, ref, FilterConfig("stroke", delta=0.0))
        assert len(report.kept) >= 1
        assert filtered.n_points >= 1

    def test_output_is_valid_sketch(self, toy_embedder):
        rng = np.random.default_rng(1)
        for _ in range(5):
            sketch = random_walk_sketch(rng, n_strokes=4)
            ref = toy_embedder.embed(rasterise(sketch))
            filtered, report = filter_noisy_strokes(sketch, toy_embedder, ref)
            assert filtered.n_points >= 1  # constructor re-validated invariants
            kept_points = sum(
                split_strokes(sketch)[i].length_points for i in report.kept
            )
            assert filtered.n_points == kept_points

    def test_removes_injected_scribble(self, toy_embedder):
        rng = np.random.default_rng(7)
        sketches, photos, _ = make_paired_corpus(20, seed=55, noise_levels=(0,), max_strokes=3)
        hits = 0
        for sketch, photo in zip(sketches, photos):
            noisy, injected = add_noise_strokes(sketch, rng, count=1, points_range=(3, 5))
            ref = toy_embedder.embed(rasterise(photo))
            _, report = filter_noisy_strokes(noisy, toy_embedder, ref, FilterConfig("stroke", delta=0.3))
            if all(i in report.removed for i in injected):
                hits += 1
        assert hits >= 14  # 70% on the small smoke corpus


class TestPointFilter:
    def test_no_point_below_threshold_identity(self, toy_embedder):
        # A single-segment sketch: the one scored point always clears the keep
        # rule (it is either the top scorer or part of a uniform fallback).
        sketch = make([(10, 10, D), (35, 30, D)])
        ref = toy_embedder.embed(rasterise(sketch))
        out = filter_noisy_points(sketch, toy_embedder, ref, FilterConfig("point", delta=0.49))
        assert out.points == sketch.points

    def test_similarity_improves_on_noisy_fixtures(self, toy_embedder):
        # Removing negative-influence segments should help the match more
        # often than not, even though point cleanup can break strokes.
        from strokescope.diffraster import soft_render

        rng = np.random.default_rng(77)
        clean, photos, _ = make_paired_corpus(60, seed=55, noise_levels=(0,), max_strokes=3)
        improved = 0
        for sketch, photo in zip(clean, photos):
            noisy, _ = add_noise_strokes(sketch, rng, count=int(rng.integers(1, 3)), points_range=(3, 5))
            ref = toy_embedder.embed(rasterise(photo))
            filtered = filter_noisy_points(noisy, toy_embedder, ref, FilterConfig("point", delta=0.1))
            before = float(toy_embedder.embed(soft_render(noisy)) @ ref)
            after = float(toy_embedder.embed(soft_render(filtered)) @ ref)
            if after >= before:
                improved += 1
        assert improved >= 36  # 60% of 60

    def test_flip_splits_stroke(self):
        # Structural consequence of the filter's pen flip.
        sketch = make([(2, 2, D), (9, 9, D), (20, 20, D), (30, 30, D)])
        pts = list(sketch.points)
        pts[1] = Point(pts[1].x, pts[1].y, PenState.UP)
        flipped = sketch.with_points(pts)
        assert len(split_strokes(sketch)) == 1
        assert len(split_strokes(flipped)) == 2

    def test_end_marker_untouched(self, toy_embedder):
        pts = [(4, 4, D), (20, 20, D), (40, 40, D)]
        sketch = make(pts)
        with_end = sketch.with_points(
            list(sketch.points) + [Point(40, 40, PenState.END)]
        )
        out = filter_noisy_points(with_end, toy_embedder, toy_embedder.embed(rasterise(sketch)), FilterConfig("point", delta=0.0))
        assert out.points[-1].pen is PenState.END

    def test_output_valid(self, toy_embedder):
        rng = np.random.default_rng(3)
        for _ in range(5):
            sketch = random_walk_sketch(rng, n_strokes=3)
            ref = toy_embedder.embed(rasterise(random_walk_sketch(rng, n_strokes=2)))
            out = filter_noisy_points(sketch, toy_embedder, ref, FilterConfig("point", delta=0.1))
            assert any(p.pen is PenState.DOWN for p in out.points)


def two_stroke_discriminative_fixture():
    """The short stroke 1 carries the only (and dominant) class-1 evidence."""
    sketch = make([(4, 4, D), (24, 4, D), (24, 4, U), (10, 30, D), (20, 30, D)])
    _, _, weights = stroke_images_and_weights(sketch)
    w = np.zeros((2, HW, HW))
    w[0][weights[0].mask.astype(bool)] = 1.0
    w[1][weights[1].mask.astype(bool)] = 3.0
    return sketch, LinearScorer(w)


class TestSlaAttack:
    def test_discriminative_stroke_selected(self):
        sketch, scorer = two_stroke_discriminative_fixture()
        strokes = split_strokes(sketch)
        assert strokes[1].length_points <= 5
        outcome = sla_attack(scorer, sketch, label=1, cfg=AttackConfig(epsilon=5, mode="stroke"))
        assert outcome.removed == (1,)
        assert outcome.success
        assert outcome.pred_before == 1 and outcome.pred_after == 0

    def test_no_candidate_within_budget(self):
        sketch, scorer = two_stroke_discriminative_fixture()
        with pytest.raises(NoCandidateError):
            sla_attack(scorer, sketch, label=1, cfg=AttackConfig(epsilon=1, mode="stroke"))

    def test_single_stroke_rejected(self, linear_scorer):
        sketch = make([(4, 4, D), (24, 4, D)])
        with pytest.raises(SketchValidationError):
            sla_attack(linear_scorer, sketch, label=0, cfg=AttackConfig(epsilon=5, mode="stroke"))

    def test_budget_respected(self, toy_classifier):
        rng = np.random.default_rng(5)
        for _ in range(5):
            sketch = random_walk_sketch(rng, n_strokes=4, points_per_stroke=(3, 6))
            try:
                outcome = sla_attack(toy_classifier, sketch, 0, AttackConfig(epsilon=5, mode="stroke"))
            except NoCandidateError:
                continue
            removed = split_strokes(sketch)[outcome.removed[0]]
            assert removed.length_points <= 5
            assert len(split_strokes(outcome.adversarial_sketch)) == len(split_strokes(sketch)) - 1

    def test_epsilon_validation(self):
        with pytest.raises(SketchValidationError):
            AttackConfig(epsilon=0, mode="stroke")


class TestPslaAttack:
    def test_top_k_semantics(self):
        assert top_k_indices([0.1, 0.5, 0.3], 2) == [1, 2]

    def test_top_k_tie_break(self):
        assert top_k_indices([0.5, 0.5, 0.1], 1) == [0]

    def test_budget_guard(self, toy_classifier):
        sketch = make([(4, 4, D), (20, 20, D)])
        with pytest.raises(BudgetError):
            psla_attack(toy_classifier, sketch, 0, AttackConfig(epsilon=2, mode="point"))

    def test_removes_exactly_epsilon_points(self, toy_classifier):
        rng = np.random.default_rng(6)
        sketch = random_walk_sketch(rng, n_strokes=3, points_per_stroke=(4, 6))
        outcome = psla_attack(toy_classifier, sketch, 0, AttackConfig(epsilon=5, mode="point"))
        assert len(outcome.removed) == 5
        assert outcome.adversarial_sketch.n_points == sketch.n_points - 5

    def test_pen_repair_on_up_removal(self):
        sketch = make([(2, 2, D), (9, 9, D), (9, 9, U), (20, 20, D), (30, 30, D)])
        from strokescope.applications import _delete_points

        out = _delete_points(sketch, {2})
        assert out is not None
        assert out.points[1].pen is PenState.UP  # lift handed to the predecessor
        assert len(split_strokes(out)) == 2

    def test_gradient_ranking_path(self, toy_classifier):
        rng = np.random.default_rng(8)
        sketch = random_walk_sketch(rng, n_strokes=3, points_per_stroke=(4, 6))
        outcome = psla_attack(
            toy_classifier, sketch, 0, AttackConfig(epsilon=3, mode="point"), gradient_ranking=True
        )
        assert len(outcome.removed) == 3

    def test_deterministic(self, toy_classifier):
        rng = np.random.default_rng(9)
        sketch = random_walk_sketch(rng, n_strokes=3, points_per_stroke=(4, 6))
        cfg = AttackConfig(epsilon=4, mode="point")
        a = psla_attack(toy_classifier, sketch, 1, cfg)
        b = psla_attack(toy_classifier, sketch, 1, cfg)
        assert a.removed == b.removed
        assert a.pred_after == b.pred_after


class TestRetrievalReliability:
    def test_gallery_of_one_rank_one(self, toy_embedder):
        rng = np.random.default_rng(10)
        sketch = random_walk_sketch(rng, n_strokes=3)
        gallery = toy_embedder.embed(rasterise(sketch))[None, :]
        report, rank = retrieval_reliability(sketch, toy_embedder, gallery, true_index=0)
        assert rank == 1
        assert report.n_strokes == 3

    def test_point_granularity_path(self, toy_embedder):
        rng = np.random.default_rng(11)
        sketch = random_walk_sketch(rng, n_strokes=2, points_per_stroke=(3, 4))
        gallery = toy_embedder.embed(rasterise(sketch))[None, :]
        report, rank = retrieval_reliability(
            sketch, toy_embedder, gallery, true_index=0, granularity="point"
        )
        assert rank == 1

    def test_empty_gallery_rejected(self, toy_embedder):
        rng = np.random.default_rng(12)
        sketch = random_walk_sketch(rng)
        with pytest.raises(ScorerError):
            retrieval_reliability(sketch, toy_embedder, np.zeros((0, 32)))


class TestBenchmarkPlumbing:
    def test_summary_and_rows(self, toy_classifier):
        rng = np.random.default_rng(13)
        sketches, labels = [], []
        from strokescope.scorers.corpus import make_classification_corpus

        base, lbls = make_classification_corpus(4, seed=77)
        for s in base:
            noisy, _ = add_noise_strokes(s, rng, count=1)
            sketches.append(noisy)
        labels = lbls
        summary, rows = run_attack_benchmark(
            toy_classifier, sketches, labels, epsilons=(5,), modes=("stroke",)
        )
        assert summary["n_sketches"] == len(sketches)
        stroke = summary["modes"]["stroke"]
        assert "accuracy_before" in stroke and "5" in stroke["epsilons"]
        csv_text = attack_rows_csv(rows)
        assert csv_text.splitlines()[0] == "sketch,mode,epsilon,attacked,label,pred_before,pred_after,removed"
        assert summary_json(summary) == summary_json(summary)
