"""Shared fixtures: a deterministic on-disk pool of annotated source images."""

from __future__ import annotations

import random
from pathlib import Path

import pytest
from PIL import Image

from groundrl.geometry import BBox
from groundrl.records import SourceRecord

SIZES = [(40, 30), (30, 40), (48, 48), (64, 40), (36, 54), (60, 30)]


def build_source_pool(
    root: Path,
    categories: tuple[str, ...] = ("aircraft", "dog", "flower"),
    entities_per_category: int = 12,
    seed: int = 0,
) -> list[SourceRecord]:
    """Write small gradient images with one annotated box each."""
    rng = random.Random(seed)
    records = []
    for category in categories:
        for i in range(entities_per_category):
            w, h = rng.choice(SIZES)
            img = Image.new("RGB", (w, h))
            base = rng.randrange(256)
            img.putdata(
                [((base + x * 3) % 256, (x * y) % 256, (base + y * 5) % 256)
                 for y in range(h) for x in range(w)]
            )
            path = root / f"{category}-{i:02d}.png"
            img.save(path)
            x1 = rng.randint(0, w // 3)
            y1 = rng.randint(0, h // 3)
            x2 = rng.randint(x1 + w // 3, w)
            y2 = rng.randint(y1 + h // 3, h)
            records.append(
                SourceRecord(
                    image_ref=str(path),
                    width=w,
                    height=h,
                    entity=f"{category}-entity-{i:02d}",
                    category=category,
                    bbox=BBox.pixel(x1, y1, x2, y2, w, h),
                )
            )
    return records


@pytest.fixture(scope="session")
def source_pool(tmp_path_factory) -> list[SourceRecord]:
    root = tmp_path_factory.mktemp("sources")
    return build_source_pool(root)
