"""Training-data filtering by multi-sample correctness.

Each case is scored several times; cases whose samples are uniformly
correct (too easy) or uniformly incorrect (too hard) are dropped, keeping
only cases where partial correctness leaves an optimization signal.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional, Sequence, TypeVar

Case = TypeVar("Case")


class Verdict(Enum):
    KEPT = "kept"
    DROPPED_ALL_CORRECT = "dropped-all-correct"
    DROPPED_ALL_INCORRECT = "dropped-all-incorrect"


def classify_case(flags: Sequence[bool]) -> Verdict:
    """Map per-sample correctness flags to a keep/drop verdict."""
    if not flags:
        raise ValueError("flags must be nonempty")
    if all(flags):
        return Verdict.DROPPED_ALL_CORRECT
    if not any(flags):
        return Verdict.DROPPED_ALL_INCORRECT
    return Verdict.KEPT


@dataclass(frozen=True)
class SamplingPassResult:
    query_id: str
    n_samples: int
    flags: tuple[bool, ...]
    verdict: Verdict

    @classmethod
    def from_flags(cls, query_id: str, flags: Sequence[bool]) -> "SamplingPassResult":
        return cls(query_id, len(flags), tuple(flags), classify_case(flags))


@dataclass(frozen=True)
class FilterReport:
    n_input: int
    n_kept: int
    n_dropped_all_correct: int
    n_dropped_all_incorrect: int
    n_errored: int

    def to_json(self) -> dict[str, Any]:
        return {
            "n_input": self.n_input,
            "n_kept": self.n_kept,
            "n_dropped_all_correct": self.n_dropped_all_correct,
            "n_dropped_all_incorrect": self.n_dropped_all_incorrect,
            "n_errored": self.n_errored,
        }


@dataclass
class FilterOutcome:
    kept: list
    results: list[SamplingPassResult]
    errored: list[str]
    report: FilterReport


def sample_seed(rng_seed: int, case_id: str, sample_index: int) -> int:
    """Deterministic per-(case, sample) seed, independent of case position.

    Seeding by case identity rather than list index makes filtering
    idempotent: re-filtering the kept subset reproduces the same flags.
    """
    return random.Random(f"{rng_seed}:{case_id}:{sample_index}").getrandbits(63)


def filter_dataset(
    cases: Sequence[Case],
    scorer: Callable[[Case, int], Any],
    n_samples: int,
    correctness_rule: Callable[[Any], bool],
    rng_seed: int,
    case_id: Optional[Callable[[Case], str]] = None,
) -> FilterOutcome:
    """Run sampling passes over every case and keep the mixed-outcome ones.

    ``scorer(case, seed)`` produces one response; ``correctness_rule`` maps a
    response to a boolean. A scorer exception marks the case as errored: it
    is excluded from the output and counted separately in the report.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    ident = case_id if case_id is not None else (lambda c: str(c))

    kept: list[Case] = []
    results: list[SamplingPassResult] = []
    errored: list[str] = []
    for case in cases:
        cid = ident(case)
        flags: list[bool] = []
        try:
            for j in range(n_samples):
                response = scorer(case, sample_seed(rng_seed, cid, j))
                flags.append(bool(correctness_rule(response)))
        except Exception:
            errored.append(cid)
            continue
        result = SamplingPassResult.from_flags(cid, flags)
        results.append(result)
        if result.verdict is Verdict.KEPT:
            kept.append(case)

    counts = {v: 0 for v in Verdict}
    for r in results:
        counts[r.verdict] += 1
    report = FilterReport(
        n_input=len(cases),
        n_kept=counts[Verdict.KEPT],
        n_dropped_all_correct=counts[Verdict.DROPPED_ALL_CORRECT],
        n_dropped_all_incorrect=counts[Verdict.DROPPED_ALL_INCORRECT],
        n_errored=len(errored),
    )
    return FilterOutcome(kept=kept, results=results, errored=errored, report=report)
