"""Stage-2 data filtering: sample each case several times and drop the
uniformly-correct (too easy) and uniformly-incorrect (too hard) ones.

Run: python demos/05_filtering.py
"""

import random

from groundrl.filtering import classify_case, filter_dataset

print("=== verdict rule ===")
for flags in ([True] * 4, [False] * 4, [True, False, False, True]):
    print(f"{[int(f) for f in flags]} -> {classify_case(flags).value}")

print("\n=== filtering 1000 cases with a per-sample coin flip ===")


def coin_scorer(case: str, seed: int) -> bool:
    return random.Random(seed).random() < 0.5


cases = [f"case-{i:04d}" for i in range(1000)]
outcome = filter_dataset(cases, coin_scorer, n_samples=4, correctness_rule=bool, rng_seed=3)
r = outcome.report
print(f"kept {r.n_kept}, all-correct {r.n_dropped_all_correct}, "
      f"all-incorrect {r.n_dropped_all_incorrect}, errored {r.n_errored}")
expected = 1 - 2 * 0.5 ** 4
print(f"kept fraction {r.n_kept / r.n_input:.3f} vs binomial expectation {expected:.3f}")

print("\n=== filtering is idempotent on the kept set ===")
second = filter_dataset(outcome.kept, coin_scorer, n_samples=4, correctness_rule=bool, rng_seed=3)
print(f"re-filtering keeps {second.report.n_kept}/{len(outcome.kept)} "
      f"(unchanged: {second.kept == outcome.kept})")

print("\n=== cases with easier or harder difficulty shift the balance ===")
for p in (0.1, 0.5, 0.9):
    def scorer(case: str, seed: int, p=p) -> bool:
        return random.Random(seed).random() < p

    rep = filter_dataset(cases, scorer, 4, bool, rng_seed=5).report
    print(f"p(correct)={p}: kept {rep.n_kept}, "
          f"all-correct {rep.n_dropped_all_correct}, all-incorrect {rep.n_dropped_all_incorrect}")
