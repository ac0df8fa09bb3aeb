"""Scene synthesis: group sampling, layout arithmetic, annotation
consistency, and determinism."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from groundrl.errors import DataError
from groundrl.geometry import BBox, PixelSpace, apply_transform, intersection_area
from groundrl.records import Layout, SourceRecord
from groundrl.synthesis import (
    CanvasPolicy,
    SelectionDistribution,
    SynthesisConfig,
    compose_scene,
    partition,
    plan_composition,
    sample_group,
    synthesize_corpus,
)


def _record(entity: str, category: str = "aircraft", w: int = 40, h: int = 30) -> SourceRecord:
    return SourceRecord(
        image_ref=f"{entity}.png",
        width=w,
        height=h,
        entity=entity,
        category=category,
        bbox=BBox.pixel(2, 2, w - 2, h - 2, w, h),
    )


class TestSampleGroup:
    def test_point_mass_forces_k(self):
        pool = [_record(f"e{i}") for i in range(6)]
        group = sample_group(pool, SelectionDistribution.point_mass(2), 7)
        assert len(group) == 2
        assert len({r.entity for r in group}) == 2

    def test_duplicate_entities_never_pair(self):
        pool = [_record("same"), _record("same"), _record("other")]
        for seed in range(50):
            group = sample_group(pool, SelectionDistribution.point_mass(2), seed)
            assert {r.entity for r in group} == {"same", "other"}

    def test_k_capped_by_distinct_entities(self):
        pool = [_record(f"e{i}") for i in range(3)]
        for seed in range(1000):
            group = sample_group(pool, SelectionDistribution.uniform(), seed)
            assert 2 <= len(group) <= 3

    def test_exhausted_pool_signals_end_of_pass(self):
        assert sample_group([_record("only")], SelectionDistribution.uniform(), 0) is None
        assert sample_group([], SelectionDistribution.uniform(), 0) is None
        # two records of the same entity: still no valid pair
        pool = [_record("same"), _record("same")]
        assert sample_group(pool, SelectionDistribution.uniform(), 0) is None

    def test_groups_are_single_category(self):
        pool = [_record(f"a{i}", "aircraft") for i in range(4)]
        pool += [_record(f"d{i}", "dog") for i in range(4)]
        for seed in range(100):
            group = sample_group(pool, SelectionDistribution.uniform(), seed)
            assert len({r.category for r in group}) == 1


class TestSelectionDistribution:
    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            SelectionDistribution((1.0, 1.0))
        with pytest.raises(ValueError):
            SelectionDistribution((0.0, 0.0, 0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            SelectionDistribution((1.0, -0.5, 0.0, 0.0, 0.0))

    def test_samples_within_support(self):
        dist = SelectionDistribution((0.5, 0.0, 0.0, 0.0, 0.5))
        rng = random.Random(3)
        draws = {dist.sample(rng) for _ in range(200)}
        assert draws <= {2, 6}


class TestPlanComposition:
    def test_horizontal_pair(self):
        plan = plan_composition([(100, 100), (100, 100)], Layout.HORIZONTAL, CanvasPolicy(), random.Random(0))
        assert (plan.canvas_width, plan.canvas_height) == (200, 100)
        assert [(t.offset_x, t.offset_y) for t in plan.transforms] == [(0, 0), (100, 0)]

    def test_grid_of_four(self):
        plan = plan_composition([(100, 100)] * 4, Layout.GRID, CanvasPolicy(), random.Random(0))
        assert (plan.canvas_width, plan.canvas_height) == (200, 200)
        assert [(t.offset_x, t.offset_y) for t in plan.transforms] == [
            (0, 0), (100, 0), (0, 100), (100, 100),
        ]

    def test_horizontal_scales_to_min_height(self):
        plan = plan_composition([(200, 100), (100, 100)], Layout.HORIZONTAL, CanvasPolicy(), random.Random(0))
        assert plan.transforms[0].scale_x == Fraction(1)
        assert plan.transforms[1].scale_x == Fraction(1)
        assert (plan.canvas_width, plan.canvas_height) == (300, 100)

    def test_vertical_scales_to_min_width(self):
        plan = plan_composition([(100, 50), (200, 80)], Layout.VERTICAL, CanvasPolicy(), random.Random(0))
        assert plan.canvas_width == 100
        assert plan.transforms[1].scale_y == Fraction(1, 2)
        assert plan.canvas_height == 50 + 40

    def test_random_plan_is_disjoint(self):
        rng = random.Random(4)
        for seed in range(30):
            plan = plan_composition(
                [(60, 40), (40, 60), (50, 50)], Layout.RANDOM, CanvasPolicy(), random.Random(seed)
            )
            rects = [
                (t.offset_x, t.offset_y, t.offset_x + sw, t.offset_y + sh)
                for t, (sw, sh) in zip(plan.transforms, plan.scaled_sizes)
            ]
            for i in range(len(rects)):
                for j in range(i + 1, len(rects)):
                    a, b = rects[i], rects[j]
                    assert a[0] >= b[2] or b[0] >= a[2] or a[1] >= b[3] or b[1] >= a[3]

    def test_random_falls_back_to_grid_when_too_tight(self):
        # With no slack and a single attempt, collisions are certain for
        # some seed; the plan must come back as a grid layout.
        policy = CanvasPolicy(random_expand=1.0, max_attempts=1)
        saw_fallback = False
        for seed in range(40):
            plan = plan_composition([(50, 50)] * 4, Layout.RANDOM, policy, random.Random(seed))
            if plan.layout is Layout.GRID:
                saw_fallback = True
                assert (plan.canvas_width, plan.canvas_height) == (100, 100)
        assert saw_fallback


class TestComposeScene:
    def test_placements_rederive_exactly(self, source_pool):
        group = [r for r in source_pool if r.category == "aircraft"][:3]
        composed = compose_scene(group, Layout.HORIZONTAL, CanvasPolicy(), 1, scene_id="s0")
        record = composed.record
        canvas = PixelSpace(record.width, record.height)
        for source, placement in zip(group, record.placements):
            assert placement.bbox == apply_transform(source.bbox, placement.transform, canvas)

    def test_tiled_layouts_never_overlap(self, source_pool):
        group = [r for r in source_pool if r.category == "dog"][:4]
        for layout in (Layout.HORIZONTAL, Layout.VERTICAL, Layout.GRID):
            record = compose_scene(group, layout, CanvasPolicy(), 2, scene_id="s").record
            boxes = [p.bbox for p in record.placements]
            for i in range(len(boxes)):
                for j in range(i + 1, len(boxes)):
                    assert intersection_area(boxes[i], boxes[j]) == 0

    def test_canvas_matches_image(self, source_pool):
        group = [r for r in source_pool if r.category == "flower"][:2]
        composed = compose_scene(group, Layout.VERTICAL, CanvasPolicy(), 3, scene_id="s")
        assert composed.image.size == (composed.record.width, composed.record.height)

    def test_unreadable_source_is_a_data_error(self, tmp_path):
        group = [
            SourceRecord(
                image_ref=str(tmp_path / "missing.png"),
                width=40, height=30, entity=f"e{i}", category="aircraft",
                bbox=BBox.pixel(2, 2, 38, 28, 40, 30),
            )
            for i in range(2)
        ]
        with pytest.raises(DataError):
            compose_scene(group, Layout.GRID, CanvasPolicy(), 0, scene_id="s")

    def test_mixed_category_group_rejected(self, source_pool):
        group = [
            next(r for r in source_pool if r.category == "dog"),
            next(r for r in source_pool if r.category == "aircraft"),
        ]
        with pytest.raises(ValueError):
            compose_scene(group, Layout.GRID, CanvasPolicy(), 0, scene_id="s")


class TestCorpus:
    def test_entity_exclusivity_and_consistency(self, source_pool, tmp_path):
        scenes = synthesize_corpus(
            source_pool, SynthesisConfig(n_scenes=40, seed=5), images_dir=tmp_path / "img"
        )
        assert len(scenes) == 40
        by_ref = {r.image_ref: r for r in source_pool}
        for scene in scenes:
            entities = [p.entity for p in scene.placements]
            assert len(entities) == len(set(entities))
            canvas = PixelSpace(scene.width, scene.height)
            for p in scene.placements:
                source = by_ref[p.source_ref]
                assert p.bbox == apply_transform(source.bbox, p.transform, canvas)

    def test_deterministic_under_seed(self, source_pool, tmp_path):
        cfg = SynthesisConfig(n_scenes=12, seed=21)
        a = synthesize_corpus(source_pool, cfg, images_dir=None)
        b = synthesize_corpus(source_pool, cfg, images_dir=None)
        assert a == b

    def test_jobs_do_not_change_output(self, source_pool):
        cfg = SynthesisConfig(n_scenes=10, seed=2)
        serial = synthesize_corpus(source_pool, cfg, images_dir=None, jobs=1)
        threaded = synthesize_corpus(source_pool, cfg, images_dir=None, jobs=4)
        assert serial == threaded

    def test_pool_too_small_raises(self):
        pool = [_record("a"), _record("b")]
        with pytest.raises(DataError):
            synthesize_corpus(pool, SynthesisConfig(n_scenes=10, seed=0, max_passes=3), None)


class TestPartition:
    def test_exact_split(self):
        scenes = synthesize_fake_scenes(10)
        stage1, stage2 = partition(scenes, 0.8, 1)
        assert len(stage1) == 8 and len(stage2) == 2
        ids1 = {s.scene_id for s in stage1}
        ids2 = {s.scene_id for s in stage2}
        assert not (ids1 & ids2)
        assert ids1 | ids2 == {s.scene_id for s in scenes}

    def test_deterministic(self):
        scenes = synthesize_fake_scenes(25)
        assert partition(scenes, 0.6, 9) == partition(scenes, 0.6, 9)

    def test_training_scale_split(self):
        # a 31,250-scene pool at 0.8 leaves a 25K stage-1 pool with a
        # 6,250-scene stage-2 pool for downstream filtering
        scenes = synthesize_fake_scenes(31_250)
        stage1, stage2 = partition(scenes, 0.8, 7)
        assert len(stage1) == 25_000
        assert len(stage2) == 6_250

    def test_split_fields_assigned(self):
        scenes = synthesize_fake_scenes(5)
        stage1, stage2 = partition(scenes, 0.5, 0)
        assert all(s.split is not None for s in stage1 + stage2)

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            partition(synthesize_fake_scenes(4), 1.0, 0)


def synthesize_fake_scenes(n: int):
    from groundrl.geometry import AffineTransform
    from groundrl.records import Placement, SceneRecord

    t = AffineTransform.identity()
    return [
        SceneRecord(
            scene_id=f"scene-{i:05d}",
            image_ref=f"images/scene-{i:05d}.png",
            width=100,
            height=100,
            category="aircraft",
            layout=Layout.GRID,
            placements=(
                Placement("a", BBox.pixel(0, 0, 40, 40, 100, 100), "a.png", t),
                Placement("b", BBox.pixel(50, 50, 90, 90, 100, 100), "b.png", t),
            ),
        )
        for i in range(n)
    ]
