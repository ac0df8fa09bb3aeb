"""Group-relative policy optimization, run end-to-end on a toy policy.

A group of responses is sampled per query, their rewards are standardized
into advantages within the group (no critic), and the policy ascends a
surrogate objective of importance ratios against the sampling snapshot plus
a KL penalty toward a frozen reference.

The toy environment is a softmax table over precomputed candidate boxes per
scene, which makes the whole loop exactly differentiable and therefore
checkable against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np

from .errors import TrainingDiverged
from .geometry import BBox, iou
from .prompts import box_literal
from .rewards import RewardConfig, total_reward


class Role(Enum):
    CURRENT = "current"
    OLD = "old"
    REFERENCE = "reference"


@dataclass
class ToyPolicy:
    """Softmax policy over candidates, one logit row per scene feature."""

    logits: np.ndarray  # shape (n_features, n_candidates)
    role: Role = Role.CURRENT

    def __post_init__(self) -> None:
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 2:
            raise ValueError("logits must be a (features x candidates) table")
        if not np.isfinite(self.logits).all():
            raise ValueError("logits must be finite")

    @property
    def n_features(self) -> int:
        return self.logits.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.logits.shape[1]

    def log_prob_row(self, feature_id: int) -> np.ndarray:
        row = self.logits[feature_id]
        shifted = row - row.max()
        return shifted - math.log(np.exp(shifted).sum())

    def prob_row(self, feature_id: int) -> np.ndarray:
        return np.exp(self.log_prob_row(feature_id))

    def log_prob(self, feature_id: int, action: int) -> float:
        return float(self.log_prob_row(feature_id)[action])

    def snapshot(self, role: Role) -> "ToyPolicy":
        return ToyPolicy(self.logits.copy(), role)


@dataclass(frozen=True)
class ToyScene:
    """One query: a ground-truth box and a fixed candidate set."""

    feature_id: int
    gt: BBox
    candidates: tuple[BBox, ...]
    ious: tuple[float, ...] = field(init=False)
    correct_index: int = field(init=False)

    def __post_init__(self) -> None:
        if len(self.candidates) < 2:
            raise ValueError("each scene needs at least 2 candidates")
        ious = tuple(iou(self.gt, c) for c in self.candidates)
        object.__setattr__(self, "ious", ious)
        object.__setattr__(self, "correct_index", int(np.argmax(ious)))


@dataclass(frozen=True)
class ToyGroundingEnv:
    scenes: tuple[ToyScene, ...]
    tau: float = 0.5

    def __post_init__(self) -> None:
        if not self.scenes:
            raise ValueError("environment has no scenes")
        counts = {len(s.candidates) for s in self.scenes}
        if len(counts) != 1:
            raise ValueError("all scenes must offer the same number of candidates")
        for s in self.scenes:
            if max(s.ious) < self.tau or min(s.ious) >= self.tau:
                raise ValueError(
                    f"scene {s.feature_id} candidate IoUs {s.ious} do not span tau={self.tau}"
                )
        ids = [s.feature_id for s in self.scenes]
        if sorted(ids) != list(range(len(self.scenes))):
            raise ValueError("feature ids must enumerate scenes 0..n-1")

    @property
    def n_candidates(self) -> int:
        return len(self.scenes[0].candidates)


def make_toy_env(
    n_scenes: int = 16,
    n_candidates: int = 6,
    rng_seed: int = 0,
    tau: float = 0.5,
    high_iou: float = 0.9,
    low_iou: float = 0.2,
) -> ToyGroundingEnv:
    """Seeded environment with one high-IoU candidate per scene.

    The correct candidate is the ground truth jittered by at most 2% per
    axis; distractors are rejection-sampled until their IoU falls at or
    below ``low_iou``.
    """
    rng = np.random.default_rng(rng_seed)
    scenes = []
    for i in range(n_scenes):
        w = int(rng.integers(200, 401))
        h = int(rng.integers(200, 401))
        x1 = int(rng.integers(0, 1001 - w))
        y1 = int(rng.integers(0, 1001 - h))
        gt = BBox.normalized(x1, y1, x1 + w, y1 + h)

        correct = gt
        for _ in range(50):
            dx = int(rng.integers(-w // 50, w // 50 + 1))
            dy = int(rng.integers(-h // 50, h // 50 + 1))
            nx1, ny1 = min(max(x1 + dx, 0), 1000 - w), min(max(y1 + dy, 0), 1000 - h)
            cand = BBox.normalized(nx1, ny1, nx1 + w, ny1 + h)
            if iou(gt, cand) >= high_iou:
                correct = cand
                break

        candidates = [correct]
        attempts = 0
        while len(candidates) < n_candidates:
            attempts += 1
            if attempts > 1000:
                # Fall back to a small box in the corner opposite the gt
                # center; always disjoint since the gt spans at most 400px.
                fx = 900 if (x1 + w // 2) <= 500 else 0
                fy = 900 if (y1 + h // 2) <= 500 else 0
                candidates.append(BBox.normalized(fx, fy, fx + 100, fy + 100))
                continue
            cw = int(rng.integers(100, 401))
            ch = int(rng.integers(100, 401))
            cx1 = int(rng.integers(0, 1001 - cw))
            cy1 = int(rng.integers(0, 1001 - ch))
            cand = BBox.normalized(cx1, cy1, cx1 + cw, cy1 + ch)
            if iou(gt, cand) <= low_iou:
                candidates.append(cand)

        order = rng.permutation(n_candidates)
        scenes.append(ToyScene(feature_id=i, gt=gt, candidates=tuple(candidates[j] for j in order)))
    return ToyGroundingEnv(scenes=tuple(scenes), tau=tau)


@dataclass(frozen=True)
class RolloutOutput:
    feature_id: int
    action: int
    response: str
    logp_current: float
    logp_old: float
    logp_ref: float


@dataclass(frozen=True)
class RolloutGroup:
    query_id: str
    outputs: tuple[RolloutOutput, ...]
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]


def make_rollout_group(
    query_id: str,
    outputs: Sequence[RolloutOutput],
    rewards: Sequence[float],
    epsilon_std: float,
) -> RolloutGroup:
    if len(outputs) != len(rewards):
        raise ValueError("one reward per output required")
    advantages = compute_advantages(list(rewards), epsilon_std)
    return RolloutGroup(query_id, tuple(outputs), tuple(rewards), tuple(advantages))


@dataclass(frozen=True)
class GrpoConfig:
    group_size: int = 4
    beta: float = 0.04
    learning_rate: float = 0.5
    iterations: int = 200
    epsilon_std: float = 1e-8
    clip_epsilon: Optional[float] = None

    def __post_init__(self) -> None:
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.epsilon_std <= 0:
            raise ValueError("epsilon_std must be > 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.clip_epsilon is not None and self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be > 0 when set")


def compute_advantages(rewards: Sequence[float], epsilon_std: float) -> list[float]:
    """Standardize a group of rewards to zero mean and unit population std.

    Groups whose reward spread falls below ``epsilon_std`` get all-zero
    advantages; they carry no learning signal either way.
    """
    n = len(rewards)
    if n < 2:
        raise ValueError("a group needs at least 2 rewards")
    mean = sum(rewards) / n
    std = math.sqrt(sum((r - mean) ** 2 for r in rewards) / n)
    if std < epsilon_std:
        return [0.0] * n
    return [(r - mean) / std for r in rewards]


def kl_estimate(logp_ref: float, logp_theta: float) -> float:
    """Nonnegative estimator x - log(x) - 1 with x the ref/current ratio."""
    if not (math.isfinite(logp_ref) and math.isfinite(logp_theta)):
        raise ValueError("log-probabilities must be finite")
    d = logp_ref - logp_theta
    return math.exp(d) - d - 1.0


def _surrogate_term(ratio: float, advantage: float, clip_epsilon: Optional[float]) -> float:
    if clip_epsilon is None:
        return ratio * advantage
    clipped = min(max(ratio, 1.0 - clip_epsilon), 1.0 + clip_epsilon)
    return min(ratio * advantage, clipped * advantage)


def _check_logps(out: RolloutOutput) -> None:
    for v in (out.logp_current, out.logp_old, out.logp_ref):
        if v is None or not math.isfinite(v):
            raise ValueError(f"output for {out.feature_id}/{out.action} lacks finite log-probs")


def objective(groups: Sequence[RolloutGroup], cfg: GrpoConfig) -> float:
    """Mean group surrogate: importance-weighted advantages minus the KL penalty."""
    if not groups:
        raise ValueError("no rollout groups")
    total = 0.0
    for group in groups:
        g = len(group.outputs)
        acc = 0.0
        for out, adv in zip(group.outputs, group.advantages):
            _check_logps(out)
            ratio = math.exp(out.logp_current - out.logp_old)
            acc += _surrogate_term(ratio, adv, cfg.clip_epsilon)
            acc -= cfg.beta * kl_estimate(out.logp_ref, out.logp_current)
        total += acc / g
    return total / len(groups)


def objective_for_policy(
    groups: Sequence[RolloutGroup], policy: ToyPolicy, cfg: GrpoConfig
) -> float:
    """The objective as a function of the current policy parameters.

    Stored old/reference log-probs stay fixed; the current log-prob of every
    output is recomputed from ``policy``. This is the function whose gradient
    the update follows, and what finite differences probe.
    """
    if not groups:
        raise ValueError("no rollout groups")
    total = 0.0
    for group in groups:
        acc = 0.0
        for out, adv in zip(group.outputs, group.advantages):
            lp = policy.log_prob(out.feature_id, out.action)
            ratio = math.exp(lp - out.logp_old)
            acc += _surrogate_term(ratio, adv, cfg.clip_epsilon)
            acc -= cfg.beta * kl_estimate(out.logp_ref, lp)
        total += acc / len(group.outputs)
    return total / len(groups)


def objective_gradient(
    groups: Sequence[RolloutGroup], policy: ToyPolicy, cfg: GrpoConfig
) -> np.ndarray:
    """Exact gradient of ``objective_for_policy`` with respect to the logits.

    Per output, d/dlogp of the surrogate term is ratio*advantage on the
    unclipped branch and 0 where the clipped branch is active; the KL penalty
    contributes beta*(x - 1) with x = exp(logp_ref - logp_current). The
    chain rule through the softmax turns each scalar into
    (onehot(action) - prob_row).
    """
    grad = np.zeros_like(policy.logits)
    if not groups:
        raise ValueError("no rollout groups")
    n_groups = len(groups)
    for group in groups:
        coeff = 1.0 / (n_groups * len(group.outputs))
        for out, adv in zip(group.outputs, group.advantages):
            _check_logps(out)
            lp = policy.log_prob(out.feature_id, out.action)
            ratio = math.exp(lp - out.logp_old)
            if cfg.clip_epsilon is None:
                d_surrogate = ratio * adv
            else:
                clipped = min(max(ratio, 1.0 - cfg.clip_epsilon), 1.0 + cfg.clip_epsilon)
                d_surrogate = ratio * adv if ratio * adv <= clipped * adv else 0.0
            x = math.exp(out.logp_ref - lp)
            d_logp = d_surrogate + cfg.beta * (x - 1.0)
            row = -policy.prob_row(out.feature_id)
            row[out.action] += 1.0
            grad[out.feature_id] += coeff * d_logp * row
    return grad


def render_toy_response(query_id: str, box: BBox) -> str:
    """Tagged response text for one sampled candidate, scored by the reward rules."""
    return (
        f"<think>weighing the candidate regions for {query_id} against the "
        f"query before settling on one</think>\n<answer>{box_literal(box)}</answer>"
    )


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    mean_reward: float
    mean_kl: float
    mean_response_length: float
    objective_value: float

    def to_json(self) -> dict[str, Any]:
        return {
            "iteration": self.iteration,
            "mean_reward": self.mean_reward,
            "mean_kl": self.mean_kl,
            "mean_response_length": self.mean_response_length,
            "objective_value": self.objective_value,
        }


@dataclass
class TrainResult:
    policy: ToyPolicy
    reference: ToyPolicy
    log: list[IterationStats]


def _rollout_pass(
    env: ToyGroundingEnv,
    policy: ToyPolicy,
    old: ToyPolicy,
    ref: ToyPolicy,
    cfg: GrpoConfig,
    reward_cfg: RewardConfig,
    rng: np.random.Generator,
) -> list[RolloutGroup]:
    groups = []
    for scene in env.scenes:
        query_id = f"scene-{scene.feature_id:03d}"
        probs = old.prob_row(scene.feature_id)
        actions = rng.choice(len(probs), size=cfg.group_size, p=probs)
        outputs, rewards = [], []
        for action in actions:
            a = int(action)
            response = render_toy_response(query_id, scene.candidates[a])
            breakdown = total_reward(response, scene.gt, reward_cfg)
            outputs.append(
                RolloutOutput(
                    feature_id=scene.feature_id,
                    action=a,
                    response=response,
                    logp_current=policy.log_prob(scene.feature_id, a),
                    logp_old=old.log_prob(scene.feature_id, a),
                    logp_ref=ref.log_prob(scene.feature_id, a),
                )
            )
            rewards.append(breakdown.total)
        groups.append(make_rollout_group(query_id, outputs, rewards, cfg.epsilon_std))
    return groups


def _stats(iteration: int, groups: Sequence[RolloutGroup], objective_value: float) -> IterationStats:
    rewards = [r for g in groups for r in g.rewards]
    kls = [kl_estimate(o.logp_ref, o.logp_current) for g in groups for o in g.outputs]
    lengths = [len(o.response) for g in groups for o in g.outputs]
    return IterationStats(
        iteration=iteration,
        mean_reward=sum(rewards) / len(rewards),
        mean_kl=sum(kls) / len(kls),
        mean_response_length=sum(lengths) / len(lengths),
        objective_value=objective_value,
    )


def train(
    env: ToyGroundingEnv,
    cfg: GrpoConfig = GrpoConfig(),
    rng_seed: int = 0,
    reward_cfg: Optional[RewardConfig] = None,
) -> TrainResult:
    """Run the full optimization loop on a toy grounding environment.

    Each iteration snapshots the policy, samples a group of candidate
    actions per scene from the snapshot, renders and scores tagged
    responses, standardizes rewards into advantages, and takes one gradient
    ascent step. The reference policy stays frozen at initialization. Row 0
    of the log records an evaluation-only pass under the initial policy.
    """
    if reward_cfg is None:
        reward_cfg = RewardConfig(tau=env.tau)
    rng = np.random.default_rng(rng_seed)
    policy = ToyPolicy(np.zeros((len(env.scenes), env.n_candidates)), Role.CURRENT)
    ref = policy.snapshot(Role.REFERENCE)

    log: list[IterationStats] = []
    groups = _rollout_pass(env, policy, policy.snapshot(Role.OLD), ref, cfg, reward_cfg, rng)
    log.append(_stats(0, groups, objective(groups, cfg)))

    for iteration in range(1, cfg.iterations + 1):
        old = policy.snapshot(Role.OLD)
        groups = _rollout_pass(env, policy, old, ref, cfg, reward_cfg, rng)
        value = objective(groups, cfg)
        grad = objective_gradient(groups, policy, cfg)
        policy.logits = policy.logits + cfg.learning_rate * grad
        if not np.isfinite(policy.logits).all():
            bad = int(np.count_nonzero(~np.isfinite(policy.logits)))
            raise TrainingDiverged(
                f"iteration {iteration}: {bad} non-finite parameters "
                f"(lr={cfg.learning_rate}, beta={cfg.beta})"
            )
        log.append(_stats(iteration, groups, value))

    return TrainResult(policy=policy, reference=ref, log=log)


def greedy_accuracy(policy: ToyPolicy, env: ToyGroundingEnv, threshold: float = 0.5) -> float:
    """Fraction of scenes whose argmax candidate reaches the IoU threshold."""
    hits = 0
    for scene in env.scenes:
        choice = int(np.argmax(policy.logits[scene.feature_id]))
        if scene.ious[choice] >= threshold:
            hits += 1
    return hits / len(env.scenes)


def write_training_log(path: str, log: Sequence[IterationStats]) -> None:
    from .records import write_jsonl

    write_jsonl(path, (row.to_json() for row in log))
