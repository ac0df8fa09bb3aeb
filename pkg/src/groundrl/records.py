"""Annotated-scene record types and their line-delimited manifest format.

Manifests are UTF-8 text files with one JSON object per line, written with
sorted keys and compact separators so that identical inputs produce
byte-identical files. Rational scale factors are serialized as exact
"num/den" strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import DataError
from .geometry import AffineTransform, BBox, PixelSpace, apply_transform


class Layout(str, Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    GRID = "grid"
    RANDOM = "random"


class Split(str, Enum):
    STAGE1 = "stage1"
    STAGE2 = "stage2"
    HELD_OUT = "held-out"


@dataclass(frozen=True)
class SourceRecord:
    """One single-entity annotated source image."""

    image_ref: str
    width: int
    height: int
    entity: str
    category: str
    bbox: BBox

    def __post_init__(self) -> None:
        if not self.entity:
            raise ValueError("entity must be nonempty")
        if not self.category:
            raise ValueError("category must be nonempty")
        if self.bbox.space != PixelSpace(self.width, self.height):
            raise ValueError(
                f"bbox space {self.bbox.space} does not match image extent "
                f"{self.width}x{self.height}"
            )


@dataclass(frozen=True)
class Placement:
    """One entity pasted into a composite scene.

    ``entity`` may be empty for externally annotated scenes whose distractor
    objects are unlabeled.
    """

    entity: str
    bbox: BBox
    source_ref: str
    transform: AffineTransform


@dataclass(frozen=True)
class SceneRecord:
    """A composite scene: canvas, category, and entity placements."""

    scene_id: str
    image_ref: str
    width: int
    height: int
    category: str
    layout: Layout
    placements: tuple[Placement, ...]
    split: Split | None = None

    def __post_init__(self) -> None:
        if len(self.placements) < 2:
            raise ValueError(f"scene {self.scene_id!r} needs at least 2 placements")
        canvas = PixelSpace(self.width, self.height)
        named = [p.entity for p in self.placements if p.entity]
        if len(named) != len(set(named)):
            raise ValueError(f"scene {self.scene_id!r} repeats an entity name")
        for p in self.placements:
            if p.bbox.space != canvas:
                raise ValueError(
                    f"placement box {p.bbox.corners()} is not in the scene canvas space"
                )

    def with_split(self, split: Split) -> "SceneRecord":
        return replace(self, split=split)


def rederive_bbox(source_bbox: BBox, placement: Placement, scene: SceneRecord) -> BBox:
    """Recompute a placement box from its source annotation and transform."""
    return apply_transform(source_bbox, placement.transform, PixelSpace(scene.width, scene.height))


# --- serialization -------------------------------------------------------

def _bbox_to_list(b: BBox) -> list[int]:
    return [b.x1, b.y1, b.x2, b.y2]


def _fraction_to_str(f: Fraction) -> str:
    return str(f)


def _transform_to_json(t: AffineTransform) -> dict[str, Any]:
    return {
        "scale_x": _fraction_to_str(t.scale_x),
        "scale_y": _fraction_to_str(t.scale_y),
        "offset_x": t.offset_x,
        "offset_y": t.offset_y,
    }


def _transform_from_json(obj: dict[str, Any]) -> AffineTransform:
    return AffineTransform(
        Fraction(obj["scale_x"]),
        Fraction(obj["scale_y"]),
        int(obj["offset_x"]),
        int(obj["offset_y"]),
    )


def source_to_json(rec: SourceRecord) -> dict[str, Any]:
    return {
        "image_ref": rec.image_ref,
        "width": rec.width,
        "height": rec.height,
        "entity": rec.entity,
        "category": rec.category,
        "bbox": _bbox_to_list(rec.bbox),
    }


def source_from_json(obj: dict[str, Any]) -> SourceRecord:
    try:
        x1, y1, x2, y2 = (int(v) for v in obj["bbox"])
        width, height = int(obj["width"]), int(obj["height"])
        return SourceRecord(
            image_ref=str(obj["image_ref"]),
            width=width,
            height=height,
            entity=str(obj["entity"]),
            category=str(obj["category"]),
            bbox=BBox.pixel(x1, y1, x2, y2, width, height),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad source record {obj!r}: {exc}") from exc


def scene_to_json(rec: SceneRecord) -> dict[str, Any]:
    return {
        "scene_id": rec.scene_id,
        "image_ref": rec.image_ref,
        "width": rec.width,
        "height": rec.height,
        "category": rec.category,
        "layout": rec.layout.value,
        "split": rec.split.value if rec.split is not None else None,
        "placements": [
            {
                "entity": p.entity,
                "bbox": _bbox_to_list(p.bbox),
                "source_ref": p.source_ref,
                "transform": _transform_to_json(p.transform),
            }
            for p in rec.placements
        ],
    }


def scene_from_json(obj: dict[str, Any]) -> SceneRecord:
    try:
        width, height = int(obj["width"]), int(obj["height"])
        placements = tuple(
            Placement(
                entity=str(p["entity"]),
                bbox=BBox.pixel(*(int(v) for v in p["bbox"]), width=width, height=height),
                source_ref=str(p["source_ref"]),
                transform=_transform_from_json(p["transform"]),
            )
            for p in obj["placements"]
        )
        split = obj.get("split")
        return SceneRecord(
            scene_id=str(obj["scene_id"]),
            image_ref=str(obj["image_ref"]),
            width=width,
            height=height,
            category=str(obj["category"]),
            layout=Layout(obj["layout"]),
            placements=placements,
            split=Split(split) if split is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad scene record: {exc}") from exc


def dump_line(obj: dict[str, Any]) -> str:
    """Stable single-line JSON used throughout the manifest formats."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: str | Path, objects: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for obj in objects:
            fh.write(dump_line(obj))
            fh.write("\n")


def read_jsonl(path: str | Path) -> Iterator[dict[str, Any]]:
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield obj


def read_source_manifest(path: str | Path) -> list[SourceRecord]:
    return [source_from_json(obj) for obj in read_jsonl(path)]


def write_source_manifest(path: str | Path, records: Iterable[SourceRecord]) -> None:
    write_jsonl(path, (source_to_json(r) for r in records))


def read_scene_manifest(path: str | Path) -> list[SceneRecord]:
    return [scene_from_json(obj) for obj in read_jsonl(path)]


def write_scene_manifest(path: str | Path, records: Iterable[SceneRecord]) -> None:
    write_jsonl(path, (scene_to_json(r) for r in records))
