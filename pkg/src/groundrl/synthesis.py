"""Composite-scene synthesis from single-entity annotated sources.

Groups of same-category sources are drawn without replacement, pasted onto a
fresh canvas under one of four layouts, and their box annotations rewritten
through exact rational transforms so every placement box can be reproduced
from its source annotation.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from PIL import Image

from .errors import DataError
from .geometry import AffineTransform, PixelSpace, apply_transform
from .records import Layout, Placement, SceneRecord, SourceRecord, Split

RNG = random.Random

K_MIN = 2
K_MAX = 6


def _as_rng(seed_or_rng: int | RNG) -> RNG:
    if isinstance(seed_or_rng, random.Random):
        return seed_or_rng
    return random.Random(seed_or_rng)


@dataclass(frozen=True)
class SelectionDistribution:
    """Distribution of the group size k over {2, ..., 6}.

    Weights are normalized at construction; at least one must be positive.
    """

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.weights) != K_MAX - K_MIN + 1:
            raise ValueError(f"expected {K_MAX - K_MIN + 1} weights for k in [{K_MIN}, {K_MAX}]")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        total = sum(self.weights)
        if total <= 0:
            raise ValueError("at least one weight must be positive")
        object.__setattr__(self, "weights", tuple(w / total for w in self.weights))

    @classmethod
    def uniform(cls) -> "SelectionDistribution":
        return cls((1.0,) * (K_MAX - K_MIN + 1))

    @classmethod
    def point_mass(cls, k: int) -> "SelectionDistribution":
        if not (K_MIN <= k <= K_MAX):
            raise ValueError(f"k must be in [{K_MIN}, {K_MAX}], got {k}")
        return cls(tuple(1.0 if K_MIN + i == k else 0.0 for i in range(K_MAX - K_MIN + 1)))

    def sample(self, rng: RNG) -> int:
        return rng.choices(range(K_MIN, K_MAX + 1), weights=self.weights, k=1)[0]


@dataclass(frozen=True)
class CanvasPolicy:
    """Rendering knobs that do not affect annotation geometry."""

    background: int = 128          # gray fill for unused canvas area
    random_expand: float = 1.5     # random-layout canvas size vs. the grid canvas
    max_attempts: int = 100        # rejection-sampling budget before grid fallback

    def __post_init__(self) -> None:
        if not (0 <= self.background <= 255):
            raise ValueError("background must be an 8-bit gray level")
        if self.random_expand < 1.0:
            raise ValueError("random_expand must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


def sample_group(
    pool: Sequence[SourceRecord],
    p_sel: SelectionDistribution,
    rng_seed: int | RNG,
) -> list[SourceRecord] | None:
    """Draw one same-category group with pairwise-distinct entities.

    Returns ``None`` when no category retains at least two distinct entities,
    which signals the end of a sampling pass rather than a failure. The
    caller removes the returned records from the pool to get
    without-replacement semantics across the pass.
    """
    rng = _as_rng(rng_seed)
    by_category: dict[str, dict[str, list[SourceRecord]]] = {}
    for rec in pool:
        by_category.setdefault(rec.category, {}).setdefault(rec.entity, []).append(rec)
    eligible = sorted(cat for cat, ents in by_category.items() if len(ents) >= 2)
    if not eligible:
        return None
    category = rng.choice(eligible)
    entities = by_category[category]
    k = min(p_sel.sample(rng), len(entities))
    chosen_entities = rng.sample(sorted(entities), k)
    return [rng.choice(entities[name]) for name in chosen_entities]


@dataclass(frozen=True)
class CompositionPlan:
    """Canvas size and per-source transforms for one composite scene."""

    canvas_width: int
    canvas_height: int
    transforms: tuple[AffineTransform, ...]
    scaled_sizes: tuple[tuple[int, int], ...]
    layout: Layout  # actual layout, i.e. grid when random placement fell back


def _scaled_size(w: int, h: int, scale: Fraction) -> tuple[int, int]:
    from .geometry import round_half_up

    return round_half_up(w * scale), round_half_up(h * scale)


def _grid_shape(k: int) -> tuple[int, int]:
    cols = math.ceil(math.sqrt(k))
    rows = math.ceil(k / cols)
    return cols, rows


def plan_composition(
    sizes: Sequence[tuple[int, int]],
    layout: Layout,
    policy: CanvasPolicy,
    rng: RNG,
) -> CompositionPlan:
    """Pure layout arithmetic: where each source lands and at what scale.

    All sources in a group are scaled uniformly (aspect preserving) to the
    group's minimum height (horizontal), minimum width (vertical), or the
    minimum cell (grid and random). Horizontal, vertical, and grid placements
    are disjoint by construction; random placement rejection-samples
    non-overlapping positions and falls back to the grid plan when the
    attempt budget runs out.
    """
    if len(sizes) < 2:
        raise ValueError("a composite needs at least 2 sources")
    if layout is Layout.HORIZONTAL:
        target_h = min(h for _, h in sizes)
        scales = [Fraction(target_h, h) for _, h in sizes]
        scaled = [_scaled_size(w, h, s) for (w, h), s in zip(sizes, scales)]
        offsets = []
        x = 0
        for sw, _ in scaled:
            offsets.append((x, 0))
            x += sw
        canvas = (x, target_h)
    elif layout is Layout.VERTICAL:
        target_w = min(w for w, _ in sizes)
        scales = [Fraction(target_w, w) for w, _ in sizes]
        scaled = [_scaled_size(w, h, s) for (w, h), s in zip(sizes, scales)]
        offsets = []
        y = 0
        for _, sh in scaled:
            offsets.append((0, y))
            y += sh
        canvas = (target_w, y)
    elif layout is Layout.GRID:
        cols, rows = _grid_shape(len(sizes))
        cell_w = min(w for w, _ in sizes)
        cell_h = min(h for _, h in sizes)
        scales = [min(Fraction(cell_w, w), Fraction(cell_h, h)) for w, h in sizes]
        scaled = [_scaled_size(w, h, s) for (w, h), s in zip(sizes, scales)]
        offsets = [((i % cols) * cell_w, (i // cols) * cell_h) for i in range(len(sizes))]
        canvas = (cols * cell_w, rows * cell_h)
    elif layout is Layout.RANDOM:
        return _plan_random(sizes, policy, rng)
    else:
        raise ValueError(f"unknown layout {layout!r}")

    transforms = tuple(
        AffineTransform(s, s, ox, oy) for s, (ox, oy) in zip(scales, offsets)
    )
    return CompositionPlan(canvas[0], canvas[1], transforms, tuple(scaled), layout)


def _rects_overlap(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _plan_random(
    sizes: Sequence[tuple[int, int]],
    policy: CanvasPolicy,
    rng: RNG,
) -> CompositionPlan:
    cols, rows = _grid_shape(len(sizes))
    cell_w = min(w for w, _ in sizes)
    cell_h = min(h for _, h in sizes)
    scales = [min(Fraction(cell_w, w), Fraction(cell_h, h)) for w, h in sizes]
    scaled = [_scaled_size(w, h, s) for (w, h), s in zip(sizes, scales)]
    canvas_w = math.ceil(cols * cell_w * policy.random_expand)
    canvas_h = math.ceil(rows * cell_h * policy.random_expand)

    placed: list[tuple[int, int, int, int]] = []
    offsets: list[tuple[int, int]] = []
    for sw, sh in scaled:
        spot = None
        for _ in range(policy.max_attempts):
            ox = rng.randint(0, canvas_w - sw)
            oy = rng.randint(0, canvas_h - sh)
            rect = (ox, oy, ox + sw, oy + sh)
            if not any(_rects_overlap(rect, other) for other in placed):
                spot = (ox, oy)
                placed.append(rect)
                break
        if spot is None:
            # Attempt budget exhausted: fall back to the deterministic grid.
            return plan_composition(sizes, Layout.GRID, policy, rng)
        offsets.append(spot)

    transforms = tuple(
        AffineTransform(s, s, ox, oy) for s, (ox, oy) in zip(scales, offsets)
    )
    return CompositionPlan(canvas_w, canvas_h, transforms, tuple(scaled), Layout.RANDOM)


@dataclass
class ComposedScene:
    record: SceneRecord
    image: Image.Image


def _load_source_image(record: SourceRecord) -> Image.Image:
    try:
        img = Image.open(record.image_ref)
        img.load()
    except OSError as exc:
        raise DataError(f"cannot read source image {record.image_ref!r}: {exc}") from exc
    if img.size != (record.width, record.height):
        raise DataError(
            f"source {record.image_ref!r} is {img.size[0]}x{img.size[1]}, "
            f"manifest says {record.width}x{record.height}"
        )
    return img.convert("RGB")


def compose_scene(
    group: Sequence[SourceRecord],
    layout: Layout,
    policy: CanvasPolicy,
    rng_seed: int | RNG,
    scene_id: str,
    image_ref: str = "",
    load_image: Callable[[SourceRecord], Image.Image] = _load_source_image,
) -> ComposedScene:
    """Render one composite scene and its rewritten annotations.

    ``image_ref`` is recorded in the scene manifest; the caller decides where
    the rendered raster is written.
    """
    if len(group) < 2:
        raise ValueError("a composite needs at least 2 sources")
    categories = {rec.category for rec in group}
    if len(categories) != 1:
        raise ValueError(f"group mixes categories: {sorted(categories)}")
    entities = [rec.entity for rec in group]
    if len(entities) != len(set(entities)):
        raise ValueError("group repeats an entity")

    rng = _as_rng(rng_seed)
    plan = plan_composition([(r.width, r.height) for r in group], layout, policy, rng)
    canvas_space = PixelSpace(plan.canvas_width, plan.canvas_height)

    g = policy.background
    canvas = Image.new("RGB", (plan.canvas_width, plan.canvas_height), (g, g, g))
    placements = []
    for rec, transform, (sw, sh) in zip(group, plan.transforms, plan.scaled_sizes):
        img = load_image(rec)
        if img.size != (sw, sh):
            img = img.resize((sw, sh), Image.Resampling.BILINEAR)
        canvas.paste(img, (transform.offset_x, transform.offset_y))
        placements.append(
            Placement(
                entity=rec.entity,
                bbox=apply_transform(rec.bbox, transform, canvas_space),
                source_ref=rec.image_ref,
                transform=transform,
            )
        )

    record = SceneRecord(
        scene_id=scene_id,
        image_ref=image_ref,
        width=plan.canvas_width,
        height=plan.canvas_height,
        category=group[0].category,
        layout=plan.layout,
        placements=tuple(placements),
    )
    return ComposedScene(record=record, image=canvas)


@dataclass(frozen=True)
class SynthesisConfig:
    n_scenes: int
    seed: int = 0
    p_sel: SelectionDistribution = field(default_factory=SelectionDistribution.uniform)
    layouts: tuple[Layout, ...] = (Layout.HORIZONTAL, Layout.VERTICAL, Layout.GRID, Layout.RANDOM)
    stage1_fraction: float = 0.8
    canvas: CanvasPolicy = field(default_factory=CanvasPolicy)
    max_passes: int = 1000

    def __post_init__(self) -> None:
        if self.n_scenes < 1:
            raise ValueError("n_scenes must be >= 1")
        if not self.layouts:
            raise ValueError("at least one layout must be enabled")
        if not (0 < self.stage1_fraction < 1):
            raise ValueError("stage1_fraction must be strictly between 0 and 1")


def synthesize_corpus(
    sources: Sequence[SourceRecord],
    config: SynthesisConfig,
    images_dir: str | Path | None,
    image_ref_prefix: str = "images",
    jobs: int = 1,
) -> list[SceneRecord]:
    """Synthesize ``config.n_scenes`` composite scenes from a source pool.

    Sampling runs in repeated without-replacement passes over the pool until
    the target count is reached. Scene composition is deterministic in
    (sources, config); each scene gets its own seed derived from the global
    one, so rendering may run on several threads without changing output.
    """
    sample_rng = random.Random(f"{config.seed}:sample")
    tasks: list[tuple[list[SourceRecord], Layout, str, str]] = []
    passes = 0
    while len(tasks) < config.n_scenes:
        if passes >= config.max_passes:
            raise DataError(
                f"pool supports only {len(tasks)} scenes after {passes} passes, "
                f"{config.n_scenes} requested"
            )
        passes += 1
        pool = list(sources)
        drew_any = False
        while len(tasks) < config.n_scenes:
            group = sample_group(pool, config.p_sel, sample_rng)
            if group is None:
                break
            drew_any = True
            for rec in group:
                pool.remove(rec)
            index = len(tasks)
            layout = sample_rng.choice(config.layouts)
            tasks.append((group, layout, f"scene-{index:05d}", f"{config.seed}:scene:{index}"))
        if not drew_any:
            raise DataError("source pool has no category with 2 distinct entities")

    def build(task: tuple[list[SourceRecord], Layout, str, str]) -> ComposedScene:
        group, layout, scene_id, scene_seed = task
        return compose_scene(
            group,
            layout,
            config.canvas,
            random.Random(scene_seed),
            scene_id=scene_id,
            image_ref=f"{image_ref_prefix}/{scene_id}.png",
        )

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool_exec:
            composed = list(pool_exec.map(build, tasks))
    else:
        composed = [build(t) for t in tasks]

    if images_dir is not None:
        out = Path(images_dir)
        out.mkdir(parents=True, exist_ok=True)
        for item in composed:
            item.image.save(out / f"{item.record.scene_id}.png", format="PNG")

    return [item.record for item in composed]


def partition(
    scenes: Sequence[SceneRecord],
    stage1_fraction: float,
    rng_seed: int | RNG,
) -> tuple[list[SceneRecord], list[SceneRecord]]:
    """Split scenes into disjoint, exhaustive stage-1 and stage-2 sets.

    The split is a seeded random subset; records keep their original manifest
    order within each side.
    """
    if not (0 < stage1_fraction < 1):
        raise ValueError("stage1_fraction must be strictly between 0 and 1")
    rng = _as_rng(rng_seed)
    n = len(scenes)
    n_stage1 = math.floor(stage1_fraction * n + 0.5)
    chosen = set(rng.sample(range(n), n_stage1))
    stage1 = [s.with_split(Split.STAGE1) for i, s in enumerate(scenes) if i in chosen]
    stage2 = [s.with_split(Split.STAGE2) for i, s in enumerate(scenes) if i not in chosen]
    return stage1, stage2
