"""Single entry point exposing the pipeline as subcommands.

    groundrl synth       compose scenes from a source manifest and partition them
    groundrl pack-sft    render prompts / package supervised training records
    groundrl filter      multi-sample filtering of a scene manifest
    groundrl train-toy   run the optimization loop on the toy environment
    groundrl reward      score (response, ground-truth) pairs
    groundrl eval        accuracy report for a prediction manifest
    groundrl analyze-kl  segment divergences for a directory of traces

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal
error. Identical inputs, flags, and seed produce byte-identical artifacts;
every artifact gets a provenance echo of the effective configuration
(embedded for reports, as a ``.meta.json`` sidecar for line-oriented
manifests).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from collections import defaultdict
from dataclasses import asdict
from pathlib import Path
from typing import Any, Optional

from . import evaluation, kl_analysis
from .config import PipelineConfig, load_pipeline_config, override
from .errors import ConfigError, DataError, GroundrlError
from .filtering import filter_dataset
from .geometry import BBox, to_normalized_1000
from .grpo import greedy_accuracy, make_toy_env, train, write_training_log
from .prompts import (
    box_literal,
    pack_sft_records,
    render_cot_prompt,
    write_sft_manifest,
)
from .records import (
    read_jsonl,
    read_scene_manifest,
    read_source_manifest,
    write_jsonl,
    write_scene_manifest,
)
from .synthesis import partition, synthesize_corpus


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _write_meta(artifact: Path, payload: dict[str, Any]) -> None:
    meta = artifact.with_name(artifact.name + ".meta.json")
    meta.write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _write_report(path: Path, payload: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _load_base_config(args: argparse.Namespace) -> PipelineConfig:
    if getattr(args, "config", None):
        return load_pipeline_config(args.config)
    return PipelineConfig()


def _seed(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    return args.seed if args.seed is not None else cfg.seed


# --- synth ------------------------------------------------------------------

def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = _load_base_config(args)
    seed = _seed(args, cfg)
    de = override(
        cfg.data_engine,
        n_scenes=args.n_scenes,
        stage1_fraction=args.stage1_fraction,
        p_sel=tuple(args.p_sel) if args.p_sel else None,
        layouts=tuple(args.layouts) if args.layouts else None,
        background=args.background,
        random_expand=args.random_expand,
        max_attempts=args.max_attempts,
    )
    source = args.source or cfg.source_manifest
    out_dir = args.out_dir or cfg.out_dir
    if not source:
        raise ConfigError("a source manifest is required (--source or config)")
    if not out_dir:
        raise ConfigError("an output directory is required (--out-dir or config)")

    sources = read_source_manifest(source)
    syn_cfg = de.to_synthesis_config(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenes = synthesize_corpus(sources, syn_cfg, images_dir=out / "images", jobs=args.jobs)
    stage1, stage2 = partition(scenes, de.stage1_fraction, random.Random(f"{seed}:partition"))
    by_id = {s.scene_id: s for s in stage1 + stage2}
    ordered = [by_id[s.scene_id] for s in scenes]

    scenes_path = out / "scenes.jsonl"
    write_scene_manifest(scenes_path, ordered)
    write_scene_manifest(out / "stage1.jsonl", stage1)
    write_scene_manifest(out / "stage2.jsonl", stage2)
    meta = {
        "command": "synth",
        "seed": seed,
        "source_manifest": str(source),
        "data_engine": asdict(de),
    }
    for name in ("scenes.jsonl", "stage1.jsonl", "stage2.jsonl"):
        _write_meta(out / name, meta)
    print(f"wrote {len(ordered)} scenes ({len(stage1)} stage-1, {len(stage2)} stage-2) to {out}")
    return 0


# --- pack-sft ----------------------------------------------------------------

def _cmd_pack_sft(args: argparse.Namespace) -> int:
    scenes = read_scene_manifest(args.scenes)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.emit_prompts:
        rows = []
        for scene in scenes:
            for index in range(len(scene.placements)):
                rows.append(
                    {
                        "scene_id": scene.scene_id,
                        "target_index": index,
                        "prompt": render_cot_prompt(scene, index),
                    }
                )
        write_jsonl(out, rows)
        _write_meta(out, {"command": "pack-sft", "mode": "emit-prompts", "scenes": str(args.scenes)})
        print(f"wrote {len(rows)} reasoning prompts to {out}")
        return 0

    if not args.cot:
        raise ConfigError("--cot is required unless --emit-prompts is given")
    cot_texts: dict[tuple[str, int], str] = {}
    for obj in read_jsonl(args.cot):
        try:
            cot_texts[(str(obj["scene_id"]), int(obj["target_index"]))] = str(obj["text"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad reasoning-text record: {exc}") from exc
    records = pack_sft_records(scenes, cot_texts)
    write_sft_manifest(out, records)
    _write_meta(out, {"command": "pack-sft", "mode": "pack", "scenes": str(args.scenes), "cot": str(args.cot)})
    print(f"wrote {len(records)} training records to {out}")
    return 0


# --- filter ------------------------------------------------------------------

def _decoy_box(gt: BBox) -> BBox:
    """A deliberately wrong prediction: a small box in the canvas corner
    opposite the target's center. Any overlap forces the target to span past
    the canvas midpoint, making its area large and the IoU negligible."""
    fx = 980 if gt.x1 + gt.x2 <= 1000 else 0
    fy = 980 if gt.y1 + gt.y2 <= 1000 else 0
    return BBox.normalized(fx, fy, fx + 20, fy + 20)


def _cmd_filter(args: argparse.Namespace) -> int:
    cfg = _load_base_config(args)
    seed = _seed(args, cfg)
    threshold = args.threshold if args.threshold is not None else cfg.eval.threshold
    scenes = read_scene_manifest(args.scenes)

    if (args.responses is None) == (args.simulate_p is None):
        raise ConfigError("exactly one of --responses or --simulate-p is required")

    if args.responses is not None:
        entries: dict[str, tuple[int, list[str]]] = {}
        for obj in read_jsonl(args.responses):
            try:
                sid = str(obj["scene_id"])
                responses = [str(r) for r in obj["responses"]]
                entries[sid] = (int(obj.get("target_index", 0)), responses)
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"bad responses record: {exc}") from exc
        cursor: dict[str, int] = defaultdict(int)
        targets: dict[str, int] = {}

        def scorer(scene, _sample_seed: int) -> tuple:
            if scene.scene_id not in entries:
                raise DataError(f"no responses for scene {scene.scene_id!r}")
            target_index, responses = entries[scene.scene_id]
            if len(responses) != args.n_samples:
                raise DataError(
                    f"scene {scene.scene_id!r} has {len(responses)} responses, "
                    f"expected {args.n_samples}"
                )
            targets[scene.scene_id] = target_index
            j = cursor[scene.scene_id]
            cursor[scene.scene_id] += 1
            return (scene, responses[j])

        def rule(item) -> bool:
            scene, response = item
            target_index = targets[scene.scene_id]
            if not (0 <= target_index < len(scene.placements)):
                raise DataError(f"target_index out of range for scene {scene.scene_id!r}")
            gt = to_normalized_1000(scene.placements[target_index].bbox)
            return evaluation.score_instance(
                response, gt, threshold, mode=args.mode, box_select="first"
            )

    else:
        p = args.simulate_p
        if not (0.0 <= p <= 1.0):
            raise ConfigError(f"--simulate-p must be in [0, 1], got {p}")

        def scorer(scene, sample_seed: int) -> tuple:
            rng = random.Random(sample_seed)
            target = rng.randrange(len(scene.placements))
            gt = to_normalized_1000(scene.placements[target].bbox)
            box = gt if rng.random() < p else _decoy_box(gt)
            return (scene, f"<think>simulated pass</think><answer>{box_literal(box)}</answer>", target)

        def rule(item) -> bool:
            scene, response, target = item
            gt = to_normalized_1000(scene.placements[target].bbox)
            return evaluation.score_instance(response, gt, threshold, mode="tagged")

    outcome = filter_dataset(
        scenes,
        scorer,
        n_samples=args.n_samples,
        correctness_rule=rule,
        rng_seed=seed,
        case_id=lambda s: s.scene_id,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scene_manifest(out, outcome.kept)
    echo = {
        "command": "filter",
        "seed": seed,
        "n_samples": args.n_samples,
        "threshold": threshold,
        "scorer": "responses-manifest" if args.responses else f"simulate-p={args.simulate_p}",
    }
    _write_meta(out, echo)
    report = dict(outcome.report.to_json())
    report["errored_cases"] = outcome.errored
    report["config"] = echo
    _write_report(Path(args.report), report)
    print(
        f"kept {outcome.report.n_kept}/{outcome.report.n_input} scenes "
        f"(all-correct {outcome.report.n_dropped_all_correct}, "
        f"all-incorrect {outcome.report.n_dropped_all_incorrect}, "
        f"errored {outcome.report.n_errored})"
    )
    return 0


# --- train-toy -----------------------------------------------------------------

def _cmd_train_toy(args: argparse.Namespace) -> int:
    cfg = _load_base_config(args)
    seed = _seed(args, cfg)
    grpo_cfg = override(
        cfg.grpo,
        group_size=args.group_size,
        beta=args.beta,
        learning_rate=args.learning_rate,
        iterations=args.iterations,
        epsilon_std=args.epsilon_std,
        clip_epsilon=args.clip_epsilon,
    )
    reward_cfg = override(cfg.reward, tau=args.tau)
    env = make_toy_env(
        n_scenes=args.n_scenes, n_candidates=args.n_candidates, rng_seed=seed, tau=reward_cfg.tau
    )
    result = train(env, grpo_cfg, rng_seed=seed, reward_cfg=reward_cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_training_log(str(out), result.log)
    accuracy = greedy_accuracy(result.policy, env, threshold=0.5)
    _write_meta(
        out,
        {
            "command": "train-toy",
            "seed": seed,
            "n_scenes": args.n_scenes,
            "n_candidates": args.n_candidates,
            "grpo": asdict(grpo_cfg),
            "reward": asdict(reward_cfg),
            "final_greedy_accuracy": accuracy,
        },
    )
    first, last = result.log[0], result.log[-1]
    print(
        f"{len(result.log)} log rows; mean reward {first.mean_reward:.4f} -> "
        f"{last.mean_reward:.4f}; greedy accuracy {accuracy:.3f}"
    )
    return 0


# --- reward score -----------------------------------------------------------------

def _cmd_reward_score(args: argparse.Namespace) -> int:
    from .rewards import total_reward

    cfg = _load_base_config(args)
    reward_cfg = override(
        cfg.reward, tau=args.tau, w_iou=args.w_iou, w_format=args.w_format,
        gate_iou_on_format=args.gate_iou_on_format or None,
    )
    rows = []
    for i, obj in enumerate(read_jsonl(args.pairs)):
        try:
            response = str(obj["response"])
            x1, y1, x2, y2 = (int(v) for v in obj["gt_bbox"])
            gt = BBox.normalized(x1, y1, x2, y2)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad pair record {i}: {exc}") from exc
        b = total_reward(response, gt, reward_cfg)
        rows.append(
            {
                "id": obj.get("id", str(i)),
                "iou_reward": b.iou_component,
                "format_reward": b.format_component,
                "total": b.total,
                "structure_ok": b.parsed.structure_ok,
                "failure_reason": b.parsed.failure_reason,
            }
        )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(out, rows)
    _write_meta(out, {"command": "reward score", "reward": asdict(reward_cfg)})
    print(f"scored {len(rows)} pairs to {out}")
    return 0


# --- eval -----------------------------------------------------------------

def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_base_config(args)
    settings = override(
        cfg.eval, threshold=args.threshold, prediction_mode=args.mode, box_select=args.box_select
    )
    gt = evaluation.read_ground_truth_manifest(args.gt)
    preds = evaluation.read_predictions_manifest(args.pred)
    report = evaluation.evaluate(
        gt,
        preds,
        threshold=settings.threshold,
        mode=settings.prediction_mode,
        box_select=settings.box_select,
        tag_keys=args.tags,
    )
    _write_report(Path(args.out_report), report.to_json())
    table = report.render_table()
    if args.out_table:
        Path(args.out_table).write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


# --- analyze-kl -----------------------------------------------------------------

def _cmd_analyze_kl(args: argparse.Namespace) -> int:
    traces = kl_analysis.read_trace_dir(args.traces)
    if not traces:
        raise DataError(f"no *.jsonl traces found in {args.traces}")
    per_trace = {name: kl_analysis.segment_divergence(t) for name, t in traces.items()}
    aggregate = kl_analysis.aggregate_traces(list(traces.values()))
    payload = {
        "traces": {name: seg.to_json() for name, seg in per_trace.items()},
        "aggregate": aggregate.to_json(),
        "config": {"traces_dir": str(args.traces)},
    }
    _write_report(Path(args.out), payload)

    def fmt(v: Optional[float]) -> str:
        return "absent" if v is None else f"{v:.6f}"

    print(f"{len(traces)} traces")
    print(f"reasoning segment: macro {fmt(aggregate.cot_macro)}, micro {fmt(aggregate.cot_micro)}")
    print(f"answer segment:    macro {fmt(aggregate.answer_macro)}, micro {fmt(aggregate.answer_micro)}")
    return 0


# --- parser -----------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="pipeline config file (JSON)")
    sub.add_argument("--seed", type=int, help="override the global seed")
    sub.add_argument("--jobs", type=int, default=1, help="worker threads where supported")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="groundrl", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("synth", help="compose scenes from a source manifest")
    _add_common(p)
    p.add_argument("--source", help="source manifest (JSONL)")
    p.add_argument("--out-dir", help="output directory for manifests and images")
    p.add_argument("--n-scenes", type=int)
    p.add_argument("--stage1-fraction", type=float)
    p.add_argument("--p-sel", type=float, nargs=5, metavar="W")
    p.add_argument("--layouts", nargs="+", choices=["horizontal", "vertical", "grid", "random"])
    p.add_argument("--background", type=int)
    p.add_argument("--random-expand", type=float)
    p.add_argument("--max-attempts", type=int)
    p.set_defaults(func=_cmd_synth)

    p = subs.add_parser("pack-sft", help="render prompts / package training records")
    _add_common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--cot", help="reasoning texts (JSONL: scene_id, target_index, text)")
    p.add_argument("--emit-prompts", action="store_true", help="write reasoning prompts instead")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pack_sft)

    p = subs.add_parser("filter", help="multi-sample filtering of a scene manifest")
    _add_common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True, help="kept-scenes manifest")
    p.add_argument("--report", required=True, help="pass report (JSON)")
    p.add_argument("--n-samples", type=int, default=4)
    p.add_argument("--threshold", type=float, help="correctness IoU threshold")
    p.add_argument("--responses", help="externally sampled responses (JSONL)")
    p.add_argument("--simulate-p", type=float, help="toy scorer: per-sample correct probability")
    p.add_argument("--mode", choices=["tagged", "bare"], default="tagged")
    p.set_defaults(func=_cmd_filter)

    p = subs.add_parser("train-toy", help="optimize the toy grounding policy")
    _add_common(p)
    p.add_argument("--out", required=True, help="training log (JSONL)")
    p.add_argument("--n-scenes", type=int, default=16)
    p.add_argument("--n-candidates", type=int, default=6)
    p.add_argument("--iterations", type=int)
    p.add_argument("--group-size", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epsilon-std", type=float)
    p.add_argument("--clip-epsilon", type=float)
    p.add_argument("--tau", type=float)
    p.set_defaults(func=_cmd_train_toy)

    p = subs.add_parser("reward", help="rule-based reward scoring")
    reward_subs = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    ps = reward_subs.add_parser("score", help="score (response, ground-truth) pairs")
    _add_common(ps)
    ps.add_argument("--pairs", required=True, help="JSONL: response, gt_bbox, optional id")
    ps.add_argument("--out", required=True)
    ps.add_argument("--tau", type=float)
    ps.add_argument("--w-iou", type=float)
    ps.add_argument("--w-format", type=float)
    ps.add_argument("--gate-iou-on-format", action="store_true")
    ps.set_defaults(func=_cmd_reward_score)

    p = subs.add_parser("eval", help="accuracy report for a prediction manifest")
    _add_common(p)
    p.add_argument("--gt", required=True, help="ground-truth manifest (JSONL)")
    p.add_argument("--pred", required=True, help="predictions manifest (JSONL)")
    p.add_argument("--threshold", type=float)
    p.add_argument("--mode", choices=["tagged", "bare"])
    p.add_argument("--box-select", choices=["first", "best"])
    p.add_argument("--tags", nargs="+", metavar="KEY",
                   help="tag keys to break out as group rows (default: all)")
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-table")
    p.set_defaults(func=_cmd_eval)

    p = subs.add_parser("analyze-kl", help="segment divergences for trace files")
    _add_common(p)
    p.add_argument("--traces", required=True, help="directory of *.jsonl traces")
    p.add_argument("--out", required=True, help="report (JSON)")
    p.set_defaults(func=_cmd_analyze_kl)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"groundrl: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (_UsageError, ConfigError) as exc:
        print(f"groundrl: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"groundrl: data error: {exc}", file=sys.stderr)
        return 2
    except GroundrlError as exc:
        print(f"groundrl: internal error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        print(f"groundrl: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
