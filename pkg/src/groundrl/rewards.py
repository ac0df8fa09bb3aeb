"""Response parsing and rule-based grounding rewards.

A well-formed response is exactly one think block followed by exactly one
answer block, with the answer containing exactly one four-integer box
literal. Parsing is total: malformed input never raises, it produces
``structure_ok=False`` with a reason code.

The spatial reward is a thresholded IoU: predictions below the alignment
threshold tau earn nothing, which keeps degenerate full-canvas boxes from
harvesting small IoU values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .geometry import BBox, NORMALIZED_EXTENT, iou

_STRUCTURE_RE = re.compile(r"<think>(.*?)</think>\s*<answer>(.*?)</answer>", re.DOTALL)
_BOX_LITERAL_RE = re.compile(r"\[\s*-?\d+(?:\s*,\s*-?\d+)*\s*\]")
_INT_RE = re.compile(r"-?\d+")

# Reason codes for structure_ok=False.
MISSING_THINK = "missing-think"
MISSING_ANSWER = "missing-answer"
DUPLICATE_TAGS = "duplicate-tags"
MALFORMED_STRUCTURE = "malformed-structure"
NO_BOX = "no-box"
MULTIPLE_BOX = "multiple-box"
BAD_BOX_ARITY = "bad-box-arity"


@dataclass(frozen=True)
class ParsedResponse:
    think_text: Optional[str] = None
    answer_text: Optional[str] = None
    box_values: Optional[tuple[int, int, int, int]] = None
    extracted_box: Optional[BBox] = None
    structure_ok: bool = False
    failure_reason: Optional[str] = None
    token_count: Optional[int] = None


@dataclass(frozen=True)
class RewardConfig:
    tau: float = 0.5
    w_iou: float = 1.0
    w_format: float = 1.0
    gate_iou_on_format: bool = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        if self.w_iou < 0 or self.w_format < 0:
            raise ValueError("reward weights must be nonnegative")


def _validated_box(values: tuple[int, int, int, int]) -> Optional[BBox]:
    x1, y1, x2, y2 = values
    if not all(0 <= v <= NORMALIZED_EXTENT for v in values):
        return None
    if x1 >= x2 or y1 >= y2:
        return None
    return BBox.normalized(x1, y1, x2, y2)


def parse_response(raw: str, token_count: Optional[int] = None) -> ParsedResponse:
    """Decompose a raw model response into think text, answer text, and box.

    Tag matching is case-sensitive and anchored at the start and end of the
    response after trimming outer whitespace.
    """
    text = raw.strip()

    counts = {tag: text.count(tag) for tag in ("<think>", "</think>", "<answer>", "</answer>")}
    fail = None
    if counts["<think>"] == 0 or counts["</think>"] == 0:
        fail = MISSING_THINK
    elif counts["<answer>"] == 0 or counts["</answer>"] == 0:
        fail = MISSING_ANSWER
    elif any(c > 1 for c in counts.values()):
        fail = DUPLICATE_TAGS
    if fail is not None:
        return ParsedResponse(failure_reason=fail, token_count=token_count)

    match = _STRUCTURE_RE.fullmatch(text)
    if match is None:
        return ParsedResponse(failure_reason=MALFORMED_STRUCTURE, token_count=token_count)
    think_text, answer_text = match.group(1), match.group(2)

    literals = _BOX_LITERAL_RE.findall(answer_text)
    if not literals:
        reason = NO_BOX
    elif len(literals) > 1:
        reason = MULTIPLE_BOX
    else:
        values = tuple(int(v) for v in _INT_RE.findall(literals[0]))
        if len(values) != 4:
            reason = BAD_BOX_ARITY
        else:
            return ParsedResponse(
                think_text=think_text,
                answer_text=answer_text,
                box_values=values,
                extracted_box=_validated_box(values),
                structure_ok=True,
                token_count=token_count,
            )
    return ParsedResponse(
        think_text=think_text,
        answer_text=answer_text,
        failure_reason=reason,
        token_count=token_count,
    )


def iou_reward(pred: BBox, gt: BBox, cfg: RewardConfig) -> float:
    """IoU when it reaches the alignment threshold, otherwise 0."""
    value = iou(gt, pred)
    return value if value >= cfg.tau else 0.0


def format_reward(parsed: ParsedResponse) -> int:
    """1 iff the response structure matched and the box is a valid normalized box."""
    return int(parsed.structure_ok and parsed.extracted_box is not None)


@dataclass(frozen=True)
class RewardBreakdown:
    total: float
    iou_component: float
    format_component: int
    parsed: ParsedResponse = field(repr=False)


def total_reward(raw: str, gt: BBox, cfg: RewardConfig = RewardConfig()) -> RewardBreakdown:
    """Weighted sum of the IoU and format rewards for one raw response.

    The IoU component is 0 whenever no box could be extracted. With
    ``gate_iou_on_format`` set, it is additionally zeroed unless the format
    reward was earned.
    """
    parsed = parse_response(raw)
    fmt = format_reward(parsed)
    if parsed.extracted_box is not None:
        iou_c = iou_reward(parsed.extracted_box, gt, cfg)
    else:
        iou_c = 0.0
    if cfg.gate_iou_on_format and fmt == 0:
        iou_c = 0.0
    return RewardBreakdown(
        total=cfg.w_iou * iou_c + cfg.w_format * fmt,
        iou_component=iou_c,
        format_component=fmt,
        parsed=parsed,
    )
