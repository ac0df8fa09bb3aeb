"""Grounding accuracy evaluation: IoU-thresholded scoring with
instance-weighted category aggregation and tag-group breakdowns.

Predictions may arrive as tagged think/answer responses or as bare box
literals (for models that emit boxes directly). Predicted boxes are clipped
to the canvas before scoring; unparseable predictions count as incorrect so
denominators stay equal across models.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

from .errors import DataError
from .geometry import BBox, NORMALIZED_EXTENT, iou
from .records import read_jsonl
from .rewards import parse_response

_BOX_LITERAL_RE = re.compile(r"\[\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\]")

PREDICTION_MODES = ("tagged", "bare")
BOX_SELECT_MODES = ("first", "best")


def clip_box_values(
    values: Sequence[int], lo: int = 0, hi: int = NORMALIZED_EXTENT
) -> Optional[BBox]:
    """Clamp raw box values to the canvas; None if nothing remains."""
    x1, y1, x2, y2 = (min(max(int(v), lo), hi) for v in values)
    if x1 >= x2 or y1 >= y2:
        return None
    return BBox.normalized(x1, y1, x2, y2)


def extract_prediction_box(
    response: str,
    mode: str = "tagged",
    box_select: str = "first",
    gt: Optional[BBox] = None,
) -> Optional[BBox]:
    """Pull the predicted box out of a raw response, clipped to the canvas.

    In tagged mode the response must satisfy the think/answer grammar. Bare
    mode scans the whole text for four-integer literals and takes the first,
    or with ``box_select="best"`` the one with the highest IoU against the
    ground truth.
    """
    if mode not in PREDICTION_MODES:
        raise ValueError(f"unknown prediction mode {mode!r}")
    if box_select not in BOX_SELECT_MODES:
        raise ValueError(f"unknown box_select {box_select!r}")
    if mode == "tagged":
        parsed = parse_response(response)
        if not parsed.structure_ok or parsed.box_values is None:
            return None
        return clip_box_values(parsed.box_values)

    matches = _BOX_LITERAL_RE.findall(response)
    if not matches:
        return None
    boxes = [clip_box_values(tuple(int(v) for v in m)) for m in matches]
    boxes = [b for b in boxes if b is not None]
    if not boxes:
        return None
    if box_select == "first":
        return boxes[0]
    if gt is None:
        raise ValueError("box_select='best' needs the ground-truth box")
    return max(boxes, key=lambda b: iou(gt, b))


@dataclass(frozen=True)
class GroundTruth:
    instance_id: str
    category: str
    bbox: BBox
    tags: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    response: str


@dataclass(frozen=True)
class ScoredInstance:
    instance_id: str
    category: str
    tags: Mapping[str, str]
    correct: bool


def score_instance(
    response: str,
    gt: BBox,
    threshold: float = 0.5,
    mode: str = "tagged",
    box_select: str = "first",
) -> bool:
    """True iff a box was extracted and its clipped IoU reaches the threshold."""
    if not (0 < threshold <= 1):
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    box = extract_prediction_box(response, mode=mode, box_select=box_select, gt=gt)
    if box is None:
        return False
    return iou(gt, box) >= threshold


@dataclass(frozen=True)
class ReportRow:
    name: str
    n: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.n


@dataclass(frozen=True)
class EvalReport:
    categories: tuple[ReportRow, ...]
    overall: ReportRow
    tag_groups: tuple[tuple[str, tuple[ReportRow, ...]], ...] = ()
    config: Mapping[str, Any] = field(default_factory=dict)

    def category_row(self, name: str) -> ReportRow:
        for row in self.categories:
            if row.name == name:
                return row
        raise KeyError(name)

    def to_json(self) -> dict[str, Any]:
        def row(r: ReportRow) -> dict[str, Any]:
            return {"name": r.name, "n": r.n, "correct": r.correct, "accuracy": r.accuracy}

        return {
            "overall": row(self.overall),
            "categories": [row(r) for r in self.categories],
            "tag_groups": {key: [row(r) for r in rows] for key, rows in self.tag_groups},
            "config": dict(self.config),
        }

    def render_table(self) -> str:
        lines = []
        width = max([len("category")] + [len(r.name) for r in self.categories])
        header = f"{'category':<{width}}  {'n':>6}  {'correct':>7}  {'accuracy':>8}"
        lines.append(header)
        lines.append("-" * len(header))
        for r in self.categories:
            lines.append(f"{r.name:<{width}}  {r.n:>6}  {r.correct:>7}  {r.accuracy:>8.4f}")
        o = self.overall
        lines.append("-" * len(header))
        lines.append(f"{'overall':<{width}}  {o.n:>6}  {o.correct:>7}  {o.accuracy:>8.4f}")
        for key, rows in self.tag_groups:
            lines.append("")
            lines.append(f"[{key}]")
            for r in rows:
                lines.append(f"{r.name:<{width}}  {r.n:>6}  {r.correct:>7}  {r.accuracy:>8.4f}")
        return "\n".join(lines) + "\n"


def aggregate(
    scored: Sequence[ScoredInstance], config: Optional[Mapping[str, Any]] = None
) -> EvalReport:
    """Per-category accuracies plus the instance-weighted overall accuracy.

    Instances sharing a tag value are additionally aggregated into group
    rows, one block per tag key.
    """
    if not scored:
        raise ValueError("nothing to aggregate")
    per_cat: dict[str, list[bool]] = {}
    per_tag: dict[str, dict[str, list[bool]]] = {}
    for s in scored:
        per_cat.setdefault(s.category, []).append(s.correct)
        for key, value in s.tags.items():
            per_tag.setdefault(key, {}).setdefault(value, []).append(s.correct)

    categories = tuple(
        ReportRow(name, len(flags), sum(flags)) for name, flags in sorted(per_cat.items())
    )
    overall = ReportRow("overall", len(scored), sum(s.correct for s in scored))
    tag_groups = tuple(
        (key, tuple(ReportRow(v, len(f), sum(f)) for v, f in sorted(values.items())))
        for key, values in sorted(per_tag.items())
    )
    return EvalReport(
        categories=categories,
        overall=overall,
        tag_groups=tag_groups,
        config=dict(config) if config else {},
    )


@dataclass(frozen=True)
class DeltaRow:
    name: str
    accuracy_a: float
    accuracy_b: float

    @property
    def delta(self) -> float:
        return self.accuracy_b - self.accuracy_a


@dataclass(frozen=True)
class DeltaReport:
    categories: tuple[DeltaRow, ...]
    overall: DeltaRow

    def to_json(self) -> dict[str, Any]:
        def row(r: DeltaRow) -> dict[str, Any]:
            return {
                "name": r.name,
                "accuracy_a": r.accuracy_a,
                "accuracy_b": r.accuracy_b,
                "delta": r.delta,
            }

        return {"overall": row(self.overall), "categories": [row(r) for r in self.categories]}


def compare_reports(a: EvalReport, b: EvalReport) -> DeltaReport:
    """Per-row accuracy deltas (b minus a) between two structurally equal reports."""
    names_a = [r.name for r in a.categories]
    names_b = [r.name for r in b.categories]
    if names_a != names_b:
        raise ValueError(f"report structures differ: {names_a} vs {names_b}")
    rows = tuple(
        DeltaRow(ra.name, ra.accuracy, rb.accuracy)
        for ra, rb in zip(a.categories, b.categories)
    )
    return DeltaReport(
        categories=rows,
        overall=DeltaRow("overall", a.overall.accuracy, b.overall.accuracy),
    )


# --- manifest-level driver -------------------------------------------------

def ground_truth_from_json(obj: dict[str, Any]) -> GroundTruth:
    try:
        x1, y1, x2, y2 = (int(v) for v in obj["bbox"])
        width, height = obj.get("width"), obj.get("height")
        if width is not None and height is not None:
            from .geometry import to_normalized_1000

            box = to_normalized_1000(
                BBox.pixel(x1, y1, x2, y2, int(width), int(height))
            )
        else:
            box = BBox.normalized(x1, y1, x2, y2)
        tags = obj.get("tags") or {}
        return GroundTruth(
            instance_id=str(obj["instance_id"]),
            category=str(obj["category"]),
            bbox=box,
            tags={str(k): str(v) for k, v in tags.items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad ground-truth record: {exc}") from exc


def read_ground_truth_manifest(path: str) -> list[GroundTruth]:
    return [ground_truth_from_json(obj) for obj in read_jsonl(path)]


def read_predictions_manifest(path: str) -> list[Prediction]:
    out = []
    for obj in read_jsonl(path):
        try:
            out.append(Prediction(str(obj["instance_id"]), str(obj["response"])))
        except KeyError as exc:
            raise DataError(f"bad prediction record: missing {exc}") from exc
    return out


def evaluate(
    ground_truth: Iterable[GroundTruth],
    predictions: Iterable[Prediction],
    threshold: float = 0.5,
    mode: str = "tagged",
    box_select: str = "first",
    tag_keys: Optional[Sequence[str]] = None,
) -> EvalReport:
    """Score a prediction set against ground truth and aggregate.

    Every prediction must reference a known instance; instances without a
    prediction count as incorrect. ``tag_keys`` restricts the tag-group
    breakdown to the named keys (default: every tag present).
    """
    gt_by_id = {g.instance_id: g for g in ground_truth}
    responses: dict[str, str] = {}
    for pred in predictions:
        if pred.instance_id not in gt_by_id:
            raise DataError(f"prediction for unknown instance {pred.instance_id!r}")
        responses[pred.instance_id] = pred.response

    scored = []
    for instance_id, gt in gt_by_id.items():
        response = responses.get(instance_id)
        correct = (
            score_instance(response, gt.bbox, threshold, mode=mode, box_select=box_select)
            if response is not None
            else False
        )
        tags = gt.tags
        if tag_keys is not None:
            tags = {k: v for k, v in tags.items() if k in tag_keys}
        scored.append(ScoredInstance(instance_id, gt.category, tags, correct))
    return aggregate(
        scored,
        config={
            "threshold": threshold,
            "prediction_mode": mode,
            "box_select": box_select,
            "tag_keys": list(tag_keys) if tag_keys is not None else None,
            "clipping": f"predictions clipped to [0, {NORMALIZED_EXTENT}] before IoU",
        },
    )
