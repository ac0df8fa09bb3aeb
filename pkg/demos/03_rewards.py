"""The rule-based reward pair: strict think/answer parsing plus a
thresholded IoU that refuses degenerate full-canvas predictions.

Run: python demos/03_rewards.py
"""

from groundrl.geometry import BBox, iou
from groundrl.rewards import RewardConfig, parse_response, total_reward

gt = BBox.normalized(100, 100, 300, 300)
cfg = RewardConfig(tau=0.5, w_iou=1.0, w_format=1.0)

responses = {
    "perfect": "<think>the left jet has four engines</think><answer>[100, 100, 300, 300]</answer>",
    "near miss": "<think>close but shifted</think><answer>[120, 120, 320, 320]</answer>",
    "below threshold": "<think>wrong side</think><answer>[250, 250, 600, 600]</answer>",
    "full-canvas hack": "<think>cover everything</think><answer>[0, 0, 1000, 1000]</answer>",
    "missing tags": "[100, 100, 300, 300]",
    "two boxes": "<think>unsure</think><answer>[100, 100, 300, 300] [0, 0, 50, 50]</answer>",
}

print(f"ground truth {gt.corners()}, tau = {cfg.tau}")
print(f"{'case':<18} {'total':>6} {'iou':>6} {'fmt':>3}  note")
for name, raw in responses.items():
    b = total_reward(raw, gt, cfg)
    parsed = b.parsed
    if parsed.extracted_box is not None:
        note = f"IoU = {iou(gt, parsed.extracted_box):.3f}"
    else:
        note = f"reason = {parsed.failure_reason}"
    print(f"{name:<18} {b.total:>6.3f} {b.iou_component:>6.3f} {b.format_component:>3}  {note}")

print("\nwhy the full-canvas box earns nothing: its IoU equals the target's")
print("area fraction of the canvas, which stays below tau for every target")
print("smaller than half the image.")

parsed = parse_response(responses["two boxes"])
print(f"\nstrict structure: two box literals -> structure_ok={parsed.structure_ok}, "
      f"reason={parsed.failure_reason}")
