"""The whole pipeline through the command-line interface: synthesize a
corpus, emit reasoning prompts, filter the stage-2 pool, train the toy
policy, and score a prediction set, all inside a temp directory.

Run: python demos/08_cli_pipeline.py
"""

import json
import random
import tempfile
from pathlib import Path

from PIL import Image

from groundrl.cli import main
from groundrl.geometry import BBox, to_normalized_1000
from groundrl.prompts import box_literal
from groundrl.records import SourceRecord, read_scene_manifest, write_source_manifest

work = Path(tempfile.mkdtemp(prefix="pipeline-demo-"))
rng = random.Random(0)

print(f"working under {work}\n")

# --- source pool -----------------------------------------------------------
sources = []
for category in ("aircraft", "car"):
    for i in range(8):
        w, h = rng.choice([(64, 48), (48, 64), (56, 56)])
        img = Image.new("RGB", (w, h), (30 * i % 256, 90, 180))
        path = work / f"{category}-{i}.png"
        img.save(path)
        sources.append(
            SourceRecord(str(path), w, h, f"{category}-model-{i}", category,
                         BBox.pixel(4, 4, w - 4, h - 4, w, h))
        )
write_source_manifest(work / "sources.jsonl", sources)
print(f"source manifest: {len(sources)} records")


def run(argv: list[str]) -> None:
    print(f"\n$ groundrl {' '.join(argv)}")
    rc = main(argv)
    assert rc == 0, f"exit code {rc}"


# --- synth -> pack-sft -> filter -> train-toy -> eval ------------------------
run(["synth", "--source", str(work / "sources.jsonl"), "--out-dir", str(work / "corpus"),
     "--n-scenes", "20", "--seed", "3"])

run(["pack-sft", "--scenes", str(work / "corpus" / "scenes.jsonl"),
     "--emit-prompts", "--out", str(work / "prompts.jsonl")])

run(["filter", "--scenes", str(work / "corpus" / "stage2.jsonl"),
     "--out", str(work / "kept.jsonl"), "--report", str(work / "filter.json"),
     "--simulate-p", "0.5", "--n-samples", "4", "--seed", "5"])

run(["train-toy", "--out", str(work / "train_log.jsonl"),
     "--iterations", "100", "--seed", "7"])

# build a prediction manifest for the synthesized scenes: the first
# placement's own box, perfect for half the scenes and shifted for the rest
scenes = read_scene_manifest(work / "corpus" / "scenes.jsonl")
with open(work / "gt.jsonl", "w") as gt_fh, open(work / "pred.jsonl", "w") as pred_fh:
    for i, scene in enumerate(scenes):
        gt = to_normalized_1000(scene.placements[0].bbox)
        gt_fh.write(json.dumps({
            "instance_id": scene.scene_id,
            "category": scene.category,
            "bbox": list(gt.corners()),
        }) + "\n")
        if i % 2 == 0:
            box = gt
        else:
            box = BBox.normalized(0, 0, 20, 20) if gt.x1 > 40 else BBox.normalized(900, 900, 980, 980)
        pred_fh.write(json.dumps({
            "instance_id": scene.scene_id,
            "response": f"<think>demo</think><answer>{box_literal(box)}</answer>",
        }) + "\n")

run(["eval", "--gt", str(work / "gt.jsonl"), "--pred", str(work / "pred.jsonl"),
     "--out-report", str(work / "eval.json"), "--out-table", str(work / "eval.txt")])

print("\nartifacts:")
for name in ("corpus/scenes.jsonl", "prompts.jsonl", "kept.jsonl", "filter.json",
             "train_log.jsonl", "eval.json"):
    size = (work / name).stat().st_size
    print(f"  {name:<22} {size:>7} bytes")
