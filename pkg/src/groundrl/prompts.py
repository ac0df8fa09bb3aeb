"""Prompt templates and supervised fine-tuning record packaging.

Boxes are rendered in the 0-1000 normalized convention as literals of the
form ``[x1, y1, x2, y2]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import DataError
from .geometry import BBox, Normalized1000, to_normalized_1000
from .records import SceneRecord, dump_line, read_jsonl, write_jsonl

UNKNOWN_ENTITY = "[Unknown]"

GROUNDING_PROMPT_TEMPLATE = "Find and give the bounding box of {entity}"

_REASONING_PROMPT_BODY = (
    "Give the reasoning process that would identify it based on the image and "
    "your knowledge\n\n"
    "Note that you MUST pay attention to the differences from other objects of "
    "the same type in this image and make a detailed comparison between them to "
    "find evidence that distinguishes this object from the others\n\n"
    "Note that you MUST first analyze the visual features that help you make a "
    "judgment, and then compare the objects\n\n"
    'Note that when an object is "[Unknown]", you can still make a comparison '
    "based on its visual features without knowing its name"
)


def box_literal(box: BBox) -> str:
    return f"[{box.x1}, {box.y1}, {box.x2}, {box.y2}]"


def render_grounding_prompt(entity: str) -> str:
    """The query sent to a grounding model for one target entity."""
    if not entity:
        raise ValueError("entity must be nonempty")
    return GROUNDING_PROMPT_TEMPLATE.format(entity=entity)


def _entity_name(name: str) -> str:
    return name if name else UNKNOWN_ENTITY

def _scene_box_literal(scene: SceneRecord, index: int) -> str:
    return box_literal(to_normalized_1000(scene.placements[index].bbox))


def render_cot_prompt(scene: SceneRecord, target_index: int) -> str:
    """Instruction given to a teacher model to write a reasoning chain.

    Enumerates every placement with its normalized box, names the target, and
    appends the fixed comparison constraints. Unlabeled placements render as
    "[Unknown]".
    """
    if not (0 <= target_index < len(scene.placements)):
        raise IndexError(
            f"target_index {target_index} out of range for {len(scene.placements)} placements"
        )
    items = [
        f"{_entity_name(p.entity)} ({_scene_box_literal(scene, i)})"
        for i, p in enumerate(scene.placements)
    ]
    enumeration = ", ".join(items[:-1]) + ", and " + items[-1]
    target = scene.placements[target_index]
    return (
        f"<|vision_start|>{scene.image_ref}<|vision_end|>\n\n"
        f"This image shows {enumeration}.\n\n"
        f"The bounding box of {_entity_name(target.entity)} is "
        f"{_scene_box_literal(scene, target_index)}.\n\n"
        f"{_REASONING_PROMPT_BODY}"
    )


@dataclass(frozen=True)
class SftRecord:
    """One supervised training example: query, reasoning text, answer box."""

    image_ref: str
    prompt: str
    cot: str
    answer_bbox: BBox

    def __post_init__(self) -> None:
        if not isinstance(self.answer_bbox.space, Normalized1000):
            raise ValueError("answer_bbox must be in normalized space")


def pack_sft_records(
    scenes: Iterable[SceneRecord],
    cot_texts: Mapping[tuple[str, int], str],
) -> list[SftRecord]:
    """Assemble one training record per (scene, placement) pair.

    ``cot_texts`` maps (scene_id, placement index) to the reasoning text for
    that target; a missing entry is an error.
    """
    out = []
    for scene in scenes:
        for index, placement in enumerate(scene.placements):
            key = (scene.scene_id, index)
            if key not in cot_texts:
                raise DataError(f"missing reasoning text for scene {scene.scene_id!r} target {index}")
            out.append(
                SftRecord(
                    image_ref=scene.image_ref,
                    prompt=render_grounding_prompt(placement.entity),
                    cot=cot_texts[key],
                    answer_bbox=to_normalized_1000(placement.bbox),
                )
            )
    return out


def sft_to_json(rec: SftRecord) -> dict[str, Any]:
    b = rec.answer_bbox
    return {
        "image_ref": rec.image_ref,
        "prompt": rec.prompt,
        "cot": rec.cot,
        "answer_bbox": [b.x1, b.y1, b.x2, b.y2],
    }


def sft_from_json(obj: dict[str, Any]) -> SftRecord:
    try:
        x1, y1, x2, y2 = (int(v) for v in obj["answer_bbox"])
        return SftRecord(
            image_ref=str(obj["image_ref"]),
            prompt=str(obj["prompt"]),
            cot=str(obj["cot"]),
            answer_bbox=BBox.normalized(x1, y1, x2, y2),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad SFT record: {exc}") from exc


def sft_line(rec: SftRecord) -> str:
    return dump_line(sft_to_json(rec))


def write_sft_manifest(path: str | Path, records: Iterable[SftRecord]) -> None:
    write_jsonl(path, (sft_to_json(r) for r in records))


def read_sft_manifest(path: str | Path) -> list[SftRecord]:
    return [sft_from_json(obj) for obj in read_jsonl(path)]
