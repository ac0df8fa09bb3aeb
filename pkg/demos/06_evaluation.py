"""Accuracy-at-IoU evaluation: instance scoring with canvas clipping,
instance-weighted category aggregation, tag-group breakdowns, and report
deltas between two models.

Run: python demos/06_evaluation.py
"""

from groundrl.evaluation import (
    GroundTruth,
    Prediction,
    compare_reports,
    evaluate,
)
from groundrl.geometry import BBox


def tagged(box: str) -> str:
    return f"<think>comparing the candidates</think><answer>{box}</answer>"


ground_truth = [
    GroundTruth("a1", "aircraft", BBox.normalized(100, 100, 400, 400), {"knowledge": "known"}),
    GroundTruth("a2", "aircraft", BBox.normalized(500, 100, 900, 500), {"knowledge": "known"}),
    GroundTruth("a3", "aircraft", BBox.normalized(50, 500, 450, 900), {"knowledge": "unknown"}),
    GroundTruth("d1", "dog", BBox.normalized(200, 200, 700, 700), {"knowledge": "known"}),
    GroundTruth("d2", "dog", BBox.normalized(600, 600, 950, 950), {"knowledge": "unknown"}),
]

baseline = [
    Prediction("a1", tagged("[100, 100, 400, 400]")),    # exact
    Prediction("a2", tagged("[100, 100, 300, 300]")),    # wrong region
    Prediction("a3", "[50, 500, 450, 900]"),             # right box, broken format
    Prediction("d1", tagged("[220, 220, 720, 720]")),    # close enough
    Prediction("d2", tagged("[0, 0, 1000, 1000]")),      # full-canvas guess
]

improved = [
    Prediction("a1", tagged("[100, 100, 400, 400]")),
    Prediction("a2", tagged("[480, 110, 910, 520]")),    # now close
    Prediction("a3", tagged("[50, 500, 450, 900]")),     # fixed format
    Prediction("d1", tagged("[200, 200, 700, 700]")),
    Prediction("d2", tagged("[0, 0, 1000, 1000]")),      # still guessing
]

report_a = evaluate(ground_truth, baseline, threshold=0.5)
report_b = evaluate(ground_truth, improved, threshold=0.5)

print("baseline model:")
print(report_a.render_table())
print("improved model:")
print(report_b.render_table())

delta = compare_reports(report_a, report_b)
print("per-category accuracy deltas (improved minus baseline):")
for row in delta.categories:
    print(f"  {row.name:<10} {row.accuracy_a:.3f} -> {row.accuracy_b:.3f}  ({row.delta:+.3f})")
print(f"  {'overall':<10} {delta.overall.accuracy_a:.3f} -> "
      f"{delta.overall.accuracy_b:.3f}  ({delta.overall.delta:+.3f})")
