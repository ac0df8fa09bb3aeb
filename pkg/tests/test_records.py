"""Record validation and manifest round trips."""

from __future__ import annotations

from fractions import Fraction

import pytest

from groundrl.errors import DataError
from groundrl.geometry import AffineTransform, BBox
from groundrl.records import (
    Layout,
    Placement,
    SceneRecord,
    SourceRecord,
    Split,
    read_scene_manifest,
    read_source_manifest,
    scene_from_json,
    scene_to_json,
    source_from_json,
    source_to_json,
    write_scene_manifest,
    write_source_manifest,
)


def make_scene(split=None) -> SceneRecord:
    t1 = AffineTransform(Fraction(1), Fraction(1), 0, 0)
    t2 = AffineTransform(Fraction(1, 2), Fraction(1, 2), 100, 0)
    return SceneRecord(
        scene_id="scene-00000",
        image_ref="images/scene-00000.png",
        width=200,
        height=100,
        category="aircraft",
        layout=Layout.HORIZONTAL,
        placements=(
            Placement("jet-a", BBox.pixel(10, 10, 90, 90, 200, 100), "a.png", t1),
            Placement("jet-b", BBox.pixel(110, 5, 160, 45, 200, 100), "b.png", t2),
        ),
        split=split,
    )


def test_source_record_validation():
    with pytest.raises(ValueError):
        SourceRecord("x.png", 100, 100, "", "aircraft", BBox.pixel(0, 0, 10, 10, 100, 100))
    with pytest.raises(ValueError):
        SourceRecord("x.png", 100, 100, "a", "", BBox.pixel(0, 0, 10, 10, 100, 100))
    with pytest.raises(ValueError):
        # bbox declared on a different canvas than the image
        SourceRecord("x.png", 100, 100, "a", "c", BBox.pixel(0, 0, 10, 10, 50, 50))


def test_scene_requires_two_placements():
    scene = make_scene()
    with pytest.raises(ValueError):
        SceneRecord(
            scene_id="s",
            image_ref="i",
            width=200,
            height=100,
            category="aircraft",
            layout=Layout.GRID,
            placements=scene.placements[:1],
        )


def test_scene_rejects_duplicate_entities():
    scene = make_scene()
    dup = (scene.placements[0], scene.placements[1].__class__(
        "jet-a", scene.placements[1].bbox, "b.png", scene.placements[1].transform
    ))
    with pytest.raises(ValueError):
        SceneRecord("s", "i", 200, 100, "aircraft", Layout.GRID, dup)


def test_scene_allows_multiple_unlabeled_placements():
    scene = make_scene()
    anon = tuple(
        Placement("", p.bbox, p.source_ref, p.transform) for p in scene.placements
    )
    rec = SceneRecord("s", "i", 200, 100, "aircraft", Layout.GRID, anon)
    assert all(p.entity == "" for p in rec.placements)


def test_source_round_trip(tmp_path):
    rec = SourceRecord("x.png", 100, 80, "jet", "aircraft", BBox.pixel(5, 5, 60, 70, 100, 80))
    assert source_from_json(source_to_json(rec)) == rec
    path = tmp_path / "sources.jsonl"
    write_source_manifest(path, [rec])
    assert read_source_manifest(path) == [rec]


def test_scene_round_trip(tmp_path):
    scene = make_scene(split=Split.STAGE1)
    assert scene_from_json(scene_to_json(scene)) == scene
    path = tmp_path / "scenes.jsonl"
    write_scene_manifest(path, [scene, make_scene()])
    assert read_scene_manifest(path) == [scene, make_scene()]


def test_fraction_scales_survive_round_trip():
    scene = make_scene()
    parsed = scene_from_json(scene_to_json(scene))
    assert parsed.placements[1].transform.scale_x == Fraction(1, 2)


def test_bad_manifest_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"image_ref": "x"}\n', encoding="utf-8")
    with pytest.raises(DataError):
        read_source_manifest(path)
    path.write_text("not json\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_source_manifest(path)
