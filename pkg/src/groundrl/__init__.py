"""Desk-scale tooling for knowledge-heavy visual grounding experiments:
composite-scene synthesis with exact annotation rewriting, rule-based
grounding rewards, a verifiable group-relative policy-optimization loop,
multi-sample data filtering, IoU-thresholded evaluation, and think/answer
KL-divergence analysis.
"""

from .geometry import (
    AffineTransform,
    BBox,
    NORMALIZED_1000,
    Normalized1000,
    PixelSpace,
    apply_transform,
    iou,
    iou_exact,
    to_normalized_1000,
    to_pixel,
)
from .records import Layout, Placement, SceneRecord, SourceRecord, Split
from .synthesis import (
    CanvasPolicy,
    SelectionDistribution,
    SynthesisConfig,
    compose_scene,
    partition,
    sample_group,
    synthesize_corpus,
)
from .prompts import pack_sft_records, render_cot_prompt, render_grounding_prompt
from .rewards import (
    ParsedResponse,
    RewardConfig,
    format_reward,
    iou_reward,
    parse_response,
    total_reward,
)
from .grpo import (
    GrpoConfig,
    RolloutGroup,
    ToyGroundingEnv,
    ToyPolicy,
    compute_advantages,
    greedy_accuracy,
    kl_estimate,
    make_toy_env,
    objective,
    objective_gradient,
    train,
)
from .filtering import Verdict, classify_case, filter_dataset
from .evaluation import aggregate, compare_reports, evaluate, score_instance
from .kl_analysis import TokenDistributionTrace, segment_divergence, token_kl

__version__ = "0.1.0"

__all__ = [
    "AffineTransform",
    "BBox",
    "CanvasPolicy",
    "GrpoConfig",
    "Layout",
    "NORMALIZED_1000",
    "Normalized1000",
    "ParsedResponse",
    "PixelSpace",
    "Placement",
    "RewardConfig",
    "RolloutGroup",
    "SceneRecord",
    "SelectionDistribution",
    "SourceRecord",
    "Split",
    "SynthesisConfig",
    "TokenDistributionTrace",
    "ToyGroundingEnv",
    "ToyPolicy",
    "Verdict",
    "aggregate",
    "apply_transform",
    "classify_case",
    "compare_reports",
    "compose_scene",
    "compute_advantages",
    "evaluate",
    "filter_dataset",
    "format_reward",
    "greedy_accuracy",
    "iou",
    "iou_exact",
    "iou_reward",
    "kl_estimate",
    "make_toy_env",
    "objective",
    "objective_gradient",
    "pack_sft_records",
    "parse_response",
    "partition",
    "render_cot_prompt",
    "render_grounding_prompt",
    "sample_group",
    "score_instance",
    "segment_divergence",
    "synthesize_corpus",
    "to_normalized_1000",
    "to_pixel",
    "token_kl",
    "total_reward",
    "train",
]
