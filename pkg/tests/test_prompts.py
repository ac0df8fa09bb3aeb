"""Prompt rendering and SFT record packaging."""

from __future__ import annotations

import pytest

from groundrl.errors import DataError
from groundrl.geometry import AffineTransform, BBox
from groundrl.prompts import (
    pack_sft_records,
    read_sft_manifest,
    render_cot_prompt,
    render_grounding_prompt,
    sft_from_json,
    sft_to_json,
    write_sft_manifest,
)
from groundrl.records import Layout, Placement, SceneRecord


def scene_with_entities(*entities: str) -> SceneRecord:
    t = AffineTransform.identity()
    step = 500 // max(len(entities), 1)
    placements = tuple(
        Placement(
            entity,
            BBox.pixel(10 + i * step, 10, 10 + i * step + 80, 90, 600, 100),
            f"src-{i}.png",
            t,
        )
        for i, entity in enumerate(entities)
    )
    return SceneRecord(
        scene_id="scene-00042",
        image_ref="images/scene-00042.png",
        width=600,
        height=100,
        category="aircraft",
        layout=Layout.HORIZONTAL,
        placements=placements,
    )


class TestGroundingPrompt:
    def test_exact_template(self):
        assert (
            render_grounding_prompt("Airbus A330")
            == "Find and give the bounding box of Airbus A330"
        )

    def test_substitution(self):
        assert (
            render_grounding_prompt("Clumber Spaniel")
            == "Find and give the bounding box of Clumber Spaniel"
        )

    def test_empty_entity_rejected(self):
        with pytest.raises(ValueError):
            render_grounding_prompt("")


class TestCotPrompt:
    def test_contains_target_line_and_box(self):
        scene = scene_with_entities("Boeing 747", "Boeing 777")
        prompt = render_cot_prompt(scene, 0)
        assert "The bounding box of Boeing 747 is [" in prompt
        assert "This image shows Boeing 747 ([" in prompt
        assert ", and Boeing 777 ([" in prompt
        assert prompt.count("Note that") == 3
        assert "MUST pay attention to the differences" in prompt
        assert "MUST first analyze the visual features" in prompt
        assert scene.image_ref in prompt

    def test_unlabeled_placement_renders_unknown(self):
        scene = scene_with_entities("Boeing 747", "")
        prompt = render_cot_prompt(scene, 0)
        assert "[Unknown] ([" in prompt

    def test_target_index_bounds(self):
        scene = scene_with_entities("a", "b")
        with pytest.raises(IndexError):
            render_cot_prompt(scene, 2)

    def test_boxes_are_normalized(self):
        scene = scene_with_entities("a", "b")
        prompt = render_cot_prompt(scene, 1)
        # second placement spans y 10..90 of a 100-high canvas
        assert "[" in prompt
        assert ", 100, " in prompt  # y1 = 10/100 * 1000


class TestPackSft:
    def test_one_record_per_target(self):
        scenes = [scene_with_entities(f"e{i}a", f"e{i}b") for i in range(3)]
        for i, s in enumerate(scenes):
            object.__setattr__(s, "scene_id", f"scene-{i:05d}")
        cots = {(s.scene_id, j): f"because {s.scene_id}/{j}" for s in scenes for j in range(2)}
        records = pack_sft_records(scenes, cots)
        assert len(records) == 6
        for rec in records:
            b = rec.answer_bbox
            assert all(0 <= v <= 1000 for v in b.corners())
            assert rec.prompt.startswith("Find and give the bounding box of ")

    def test_missing_text_is_an_error(self):
        scene = scene_with_entities("a", "b")
        with pytest.raises(DataError):
            pack_sft_records([scene], {(scene.scene_id, 0): "only one"})

    def test_round_trip(self, tmp_path):
        scene = scene_with_entities("a", "b")
        cots = {(scene.scene_id, j): f"text {j}" for j in range(2)}
        records = pack_sft_records([scene], cots)
        assert [sft_from_json(sft_to_json(r)) for r in records] == records
        path = tmp_path / "sft.jsonl"
        write_sft_manifest(path, records)
        assert read_sft_manifest(path) == records
