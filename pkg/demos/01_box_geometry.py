"""Rectangle arithmetic walkthrough: exact IoU, annotation rewriting,
and the 0-1000 normalized convention.

Run: python demos/01_box_geometry.py
"""

from fractions import Fraction

from groundrl.geometry import (
    AffineTransform,
    BBox,
    PixelSpace,
    apply_transform,
    iou,
    iou_exact,
    to_normalized_1000,
    to_pixel,
)

print("=== exact IoU ===")
a = BBox.pixel(0, 0, 10, 10, 64, 64)
b = BBox.pixel(5, 0, 15, 10, 64, 64)
print(f"a = {a.corners()}, b = {b.corners()}")
print(f"iou_exact(a, b) = {iou_exact(a, b)}  (float: {iou(a, b):.6f})")
print(f"symmetric: iou(b, a) = {iou(b, a):.6f}")
print(f"self overlap: iou(a, a) = {iou(a, a)}")

print("\n=== rewriting an annotation onto a composite canvas ===")
# A 200x100 source pasted at x=300 after shrinking by half.
source_box = BBox.pixel(20, 10, 120, 90, 200, 100)
transform = AffineTransform(Fraction(1, 2), Fraction(1, 2), 300, 0)
canvas = PixelSpace(400, 100)
rewritten = apply_transform(source_box, transform, canvas)
print(f"source box {source_box.corners()} -> canvas box {rewritten.corners()}")
print(f"recorded transform: scale {transform.scale_x}, offset ({transform.offset_x}, {transform.offset_y})")

print("\n=== normalized 0-1000 space ===")
box = BBox.pixel(50, 50, 150, 150, 200, 400)
norm = to_normalized_1000(box)
print(f"{box.corners()} on a 200x400 canvas -> {norm.corners()} normalized")
back = to_pixel(norm, 200, 400)
print(f"round trip -> {back.corners()}, iou with original = {iou(box, back)}")
