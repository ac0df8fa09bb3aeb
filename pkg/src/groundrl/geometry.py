"""Exact axis-aligned rectangle arithmetic.

Boxes use integer coordinates with a half-open convention: a box covers the
unit cells with x1 <= x < x2 and y1 <= y < y2, so area is simply
(x2 - x1) * (y2 - y1). Intersection-over-union is computed in integer and
rational arithmetic and converted to floating point only at the API
boundary, which keeps equality tests exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import CoordSpaceError, TransformError

NORMALIZED_EXTENT = 1000


@dataclass(frozen=True)
class PixelSpace:
    """Coordinate space of a concrete raster canvas."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"canvas extent must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class Normalized1000:
    """Resolution-independent space with both axes spanning [0, 1000]."""


NORMALIZED_1000 = Normalized1000()

CoordSpace = Union[PixelSpace, Normalized1000]


def round_half_up(value: Union[int, Fraction]) -> int:
    """Round to the nearest integer, ties away from the floor (0.5 -> 1)."""
    return math.floor(Fraction(value) + Fraction(1, 2))


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle with integer corners, half-open on both axes."""

    x1: int
    y1: int
    x2: int
    y2: int
    space: CoordSpace

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValueError(f"{name} must be an integer, got {v!r}")
        if self.x1 >= self.x2 or self.y1 >= self.y2:
            raise ValueError(
                f"box must have positive area: [{self.x1}, {self.y1}, {self.x2}, {self.y2}]"
            )
        if isinstance(self.space, PixelSpace):
            if not (0 <= self.x1 and self.x2 <= self.space.width):
                raise ValueError(f"x range [{self.x1}, {self.x2}] exceeds width {self.space.width}")
            if not (0 <= self.y1 and self.y2 <= self.space.height):
                raise ValueError(f"y range [{self.y1}, {self.y2}] exceeds height {self.space.height}")
        else:
            for v in (self.x1, self.y1, self.x2, self.y2):
                if not (0 <= v <= NORMALIZED_EXTENT):
                    raise ValueError(f"normalized coordinate {v} outside [0, {NORMALIZED_EXTENT}]")

    @classmethod
    def pixel(cls, x1: int, y1: int, x2: int, y2: int, width: int, height: int) -> "BBox":
        return cls(x1, y1, x2, y2, PixelSpace(width, height))

    @classmethod
    def normalized(cls, x1: int, y1: int, x2: int, y2: int) -> "BBox":
        return cls(x1, y1, x2, y2, NORMALIZED_1000)

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height

    def corners(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class AffineTransform:
    """Uniform or anisotropic scale followed by an integer translation.

    Scales are kept as exact rationals so that rewritten annotations can be
    reproduced bit-for-bit from the recorded transform.
    """

    scale_x: Fraction
    scale_y: Fraction
    offset_x: int
    offset_y: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "scale_x", Fraction(self.scale_x))
        object.__setattr__(self, "scale_y", Fraction(self.scale_y))
        if self.scale_x <= 0 or self.scale_y <= 0:
            raise ValueError(f"scales must be positive, got {self.scale_x}, {self.scale_y}")
        if not isinstance(self.offset_x, int) or not isinstance(self.offset_y, int):
            raise ValueError("offsets must be integers")

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(Fraction(1), Fraction(1), 0, 0)

    def then(self, other: "AffineTransform") -> "AffineTransform":
        """Compose with ``other`` applied second.

        Offsets of the combined transform are rounded to integers, so the
        composition matches applying the two transforms in sequence only up
        to one pixel per coordinate.
        """
        return AffineTransform(
            self.scale_x * other.scale_x,
            self.scale_y * other.scale_y,
            round_half_up(self.offset_x * other.scale_x) + other.offset_x,
            round_half_up(self.offset_y * other.scale_y) + other.offset_y,
        )


def _require_same_space(a: BBox, b: BBox) -> None:
    if a.space != b.space:
        raise CoordSpaceError(f"coordinate spaces differ: {a.space} vs {b.space}")


def intersection_area(a: BBox, b: BBox) -> int:
    """Area of the overlap between two boxes in the same space (0 if disjoint)."""
    _require_same_space(a, b)
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if w <= 0 or h <= 0:
        return 0
    return w * h


def iou_exact(a: BBox, b: BBox) -> Fraction:
    """Intersection-over-union as an exact rational."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    return Fraction(inter, union)


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union in [0, 1]; symmetric, 1 iff the boxes are equal."""
    return float(iou_exact(a, b))


def apply_transform(box: BBox, transform: AffineTransform, target: PixelSpace) -> BBox:
    """Rewrite a pixel-space box onto the canvas described by ``target``.

    Each coordinate is scaled, then offset, then rounded half-up. A
    transform that rounds the box down to zero area is an error rather than
    a silent clamp.
    """
    if not isinstance(box.space, PixelSpace):
        raise CoordSpaceError("apply_transform expects a pixel-space box")
    x1 = round_half_up(box.x1 * transform.scale_x) + transform.offset_x
    y1 = round_half_up(box.y1 * transform.scale_y) + transform.offset_y
    x2 = round_half_up(box.x2 * transform.scale_x) + transform.offset_x
    y2 = round_half_up(box.y2 * transform.scale_y) + transform.offset_y
    if x1 >= x2 or y1 >= y2:
        raise TransformError(
            f"transform collapsed box {box.corners()} to [{x1}, {y1}, {x2}, {y2}]"
        )
    return BBox(x1, y1, x2, y2, target)


def to_normalized_1000(box: BBox) -> BBox:
    """Map a pixel-space box to the 0-1000 normalized space of its canvas.

    For canvases up to 1000 pixels per side the mapping is lossless on the
    way back; larger canvases quantize to 1/1000 of the extent.
    """
    if not isinstance(box.space, PixelSpace):
        raise CoordSpaceError("box is not in pixel space")
    w, h = box.space.width, box.space.height
    return BBox(
        round_half_up(Fraction(NORMALIZED_EXTENT * box.x1, w)),
        round_half_up(Fraction(NORMALIZED_EXTENT * box.y1, h)),
        round_half_up(Fraction(NORMALIZED_EXTENT * box.x2, w)),
        round_half_up(Fraction(NORMALIZED_EXTENT * box.y2, h)),
        NORMALIZED_1000,
    )


def to_pixel(box: BBox, width: int, height: int) -> BBox:
    """Map a normalized box back onto a concrete canvas."""
    if not isinstance(box.space, Normalized1000):
        raise CoordSpaceError("box is not in normalized space")
    if width <= 0 or height <= 0:
        raise ValueError(f"canvas extent must be positive, got {width}x{height}")
    return BBox(
        round_half_up(Fraction(box.x1 * width, NORMALIZED_EXTENT)),
        round_half_up(Fraction(box.y1 * height, NORMALIZED_EXTENT)),
        round_half_up(Fraction(box.x2 * width, NORMALIZED_EXTENT)),
        round_half_up(Fraction(box.y2 * height, NORMALIZED_EXTENT)),
        PixelSpace(width, height),
    )
