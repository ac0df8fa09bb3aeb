"""Think/answer KL analysis: build traces that mimic two training flavors
and read their signatures off the segment means. A model whose reasoning
changed diverges before the boundary; a model whose grounding sharpened
diverges after it.

Run: python demos/07_kl_analysis.py
"""

import random

from groundrl.kl_analysis import (
    TokenDistributionTrace,
    aggregate_traces,
    segment_divergence,
)

rng = random.Random(0)


def dist(peak: int, sharpness: float) -> dict[int, float]:
    weights = [sharpness if t == peak else 1.0 for t in range(6)]
    total = sum(weights)
    return {t: w / total for t, w in enumerate(weights)}


def perturbed(d: dict[int, float], amount: float) -> dict[int, float]:
    weights = {t: p * (1 + amount * rng.uniform(-1, 1)) for t, p in d.items()}
    total = sum(weights.values())
    return {t: w / total for t, w in weights.items()}


def make_trace(n_cot: int, n_answer: int, cot_shift: float, answer_shift: float):
    positions = []
    for i in range(n_cot + n_answer):
        base = dist(peak=i % 6, sharpness=5.0)
        shift = cot_shift if i < n_cot else answer_shift
        positions.append((perturbed(base, shift), base))
    return TokenDistributionTrace(tuple(positions), n_cot)


print("=== one trace, reasoning changed but the answer did not ===")
trace = make_trace(n_cot=12, n_answer=4, cot_shift=0.6, answer_shift=0.0)
seg = segment_divergence(trace)
print(f"reasoning segment mean KL: {seg.cot_mean_kl:.4f}")
print(f"answer segment mean KL:    {seg.answer_mean_kl:.4f}")

print("\n=== two populations of traces ===")
reasoning_heavy = [make_trace(12, 4, 0.6, 0.05) for _ in range(20)]
answer_heavy = [make_trace(12, 4, 0.05, 0.6) for _ in range(20)]

for label, traces in (("reasoning-shifted", reasoning_heavy), ("answer-shifted", answer_heavy)):
    agg = aggregate_traces(traces)
    print(f"{label:<18} cot macro {agg.cot_macro:.4f}  answer macro {agg.answer_macro:.4f}")

print("\nthe asymmetry of the two rows is the fingerprint: supervised")
print("reasoning training moves the think segment, reward-driven grounding")
print("training moves the answer segment.")
