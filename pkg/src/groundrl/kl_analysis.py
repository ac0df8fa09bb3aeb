"""Token-level KL divergence between two models' response distributions,
split at the think/answer boundary and averaged per segment.

Traces hold one sparse distribution pair per realized token position. The
boundary index is recorded by whatever produced the trace (the position
immediately after the closing think tag); this module never re-tokenizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .errors import DataError
from .records import dump_line

SMOOTHING = 1e-10
SUM_TOLERANCE = 1e-6


def _validate_distribution(dist: Mapping[int, float], label: str) -> None:
    if not dist:
        raise ValueError(f"{label} distribution is empty")
    total = 0.0
    for token, prob in dist.items():
        if prob < 0:
            raise ValueError(f"{label} assigns negative mass to token {token}")
        total += prob
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise ValueError(f"{label} distribution sums to {total}, not 1")


def token_kl(p: Mapping[int, float], q: Mapping[int, float]) -> float:
    """KL(p || q) over the union support after additive smoothing.

    Both inputs may be top-k truncations; they are renormalized over the
    union of their supports with additive smoothing so q is positive
    wherever p is. Zero iff the smoothed distributions coincide.
    """
    _validate_distribution(p, "p")
    _validate_distribution(q, "q")
    support = sorted(set(p) | set(q))
    p_vals = [p.get(t, 0.0) + SMOOTHING for t in support]
    q_vals = [q.get(t, 0.0) + SMOOTHING for t in support]
    p_total = sum(p_vals)
    q_total = sum(q_vals)
    out = 0.0
    for pv, qv in zip(p_vals, q_vals):
        pn = pv / p_total
        qn = qv / q_total
        out += pn * math.log(pn / qn)
    # Guard against a tiny negative from cancellation when p == q.
    return max(out, 0.0)


@dataclass(frozen=True)
class TokenDistributionTrace:
    """Parallel per-position distributions for models P and Q."""

    positions: tuple[tuple[Mapping[int, float], Mapping[int, float]], ...]
    split_index: int

    def __post_init__(self) -> None:
        if not (0 <= self.split_index <= len(self.positions)):
            raise ValueError(
                f"split_index {self.split_index} outside [0, {len(self.positions)}]"
            )
        for i, (p, q) in enumerate(self.positions):
            _validate_distribution(p, f"position {i} P")
            _validate_distribution(q, f"position {i} Q")

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class SegmentDivergence:
    cot_mean_kl: Optional[float]
    answer_mean_kl: Optional[float]
    position_kls: tuple[float, ...]

    def to_json(self) -> dict[str, Any]:
        return {
            "cot_mean_kl": self.cot_mean_kl,
            "answer_mean_kl": self.answer_mean_kl,
            "n_positions": len(self.position_kls),
        }


def segment_divergence(trace: TokenDistributionTrace) -> SegmentDivergence:
    """Mean per-position KL before and after the think/answer boundary.

    An empty segment yields None rather than 0 so absent reasoning is
    distinguishable from identical reasoning.
    """
    kls = tuple(token_kl(p, q) for p, q in trace.positions)
    cot = kls[: trace.split_index]
    answer = kls[trace.split_index:]
    return SegmentDivergence(
        cot_mean_kl=sum(cot) / len(cot) if cot else None,
        answer_mean_kl=sum(answer) / len(answer) if answer else None,
        position_kls=kls,
    )


@dataclass(frozen=True)
class AggregateDivergence:
    """Cross-trace summary, both per-trace-averaged (macro) and pooled (micro)."""

    n_traces: int
    cot_macro: Optional[float]
    cot_micro: Optional[float]
    answer_macro: Optional[float]
    answer_micro: Optional[float]

    def to_json(self) -> dict[str, Any]:
        return {
            "n_traces": self.n_traces,
            "cot_macro": self.cot_macro,
            "cot_micro": self.cot_micro,
            "answer_macro": self.answer_macro,
            "answer_micro": self.answer_micro,
        }


def aggregate_traces(traces: Sequence[TokenDistributionTrace]) -> AggregateDivergence:
    cot_means: list[float] = []
    answer_means: list[float] = []
    cot_pool: list[float] = []
    answer_pool: list[float] = []
    for trace in traces:
        seg = segment_divergence(trace)
        if seg.cot_mean_kl is not None:
            cot_means.append(seg.cot_mean_kl)
            cot_pool.extend(seg.position_kls[: trace.split_index])
        if seg.answer_mean_kl is not None:
            answer_means.append(seg.answer_mean_kl)
            answer_pool.extend(seg.position_kls[trace.split_index:])

    def mean(values: list[float]) -> Optional[float]:
        return sum(values) / len(values) if values else None

    return AggregateDivergence(
        n_traces=len(traces),
        cot_macro=mean(cot_means),
        cot_micro=mean(cot_pool),
        answer_macro=mean(answer_means),
        answer_micro=mean(answer_pool),
    )


# --- trace files -----------------------------------------------------------
#
# One trace per file: a header line {"split_index": s}, then one line per
# position carrying the two sparse maps, token ids as JSON object keys.

def write_trace(path: str | Path, trace: TokenDistributionTrace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_line({"split_index": trace.split_index}))
        fh.write("\n")
        for p, q in trace.positions:
            fh.write(
                dump_line(
                    {
                        "p": {str(t): v for t, v in sorted(p.items())},
                        "q": {str(t): v for t, v in sorted(q.items())},
                    }
                )
            )
            fh.write("\n")


def _parse_sparse(obj: Any, label: str, path: str | Path, lineno: int) -> dict[int, float]:
    if not isinstance(obj, dict):
        raise DataError(f"{path}:{lineno}: {label} must be an object")
    try:
        return {int(k): float(v) for k, v in obj.items()}
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}:{lineno}: bad {label} entry: {exc}") from exc


def read_trace(path: str | Path) -> TokenDistributionTrace:
    import json

    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.strip() for line in fh if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read trace {path}: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty trace file")
    try:
        header = json.loads(lines[0])
        split_index = int(header["split_index"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}:1: bad trace header: {exc}") from exc
    positions = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        positions.append(
            (
                _parse_sparse(obj.get("p"), "p", path, lineno),
                _parse_sparse(obj.get("q"), "q", path, lineno),
            )
        )
    try:
        return TokenDistributionTrace(tuple(positions), split_index)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def read_trace_dir(directory: str | Path) -> dict[str, TokenDistributionTrace]:
    """All *.jsonl traces in a directory, keyed by file stem, sorted by name."""
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"{directory} is not a directory")
    out = {}
    for path in sorted(root.glob("*.jsonl")):
        out[path.stem] = read_trace(path)
    return out
