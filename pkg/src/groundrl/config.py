"""Unified pipeline configuration.

One JSON file configures every subcommand; any key can be overridden by a
command-line flag, and the effective values are echoed into each output
artifact for provenance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError
from .grpo import GrpoConfig
from .records import Layout
from .rewards import RewardConfig
from .synthesis import CanvasPolicy, SelectionDistribution, SynthesisConfig


@dataclass(frozen=True)
class DataEngineSettings:
    n_scenes: int = 200
    p_sel: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0)
    layouts: tuple[str, ...] = ("horizontal", "vertical", "grid", "random")
    stage1_fraction: float = 0.8
    background: int = 128
    random_expand: float = 1.5
    max_attempts: int = 100

    def to_synthesis_config(self, seed: int) -> SynthesisConfig:
        try:
            return SynthesisConfig(
                n_scenes=self.n_scenes,
                seed=seed,
                p_sel=SelectionDistribution(tuple(self.p_sel)),
                layouts=tuple(Layout(name) for name in self.layouts),
                stage1_fraction=self.stage1_fraction,
                canvas=CanvasPolicy(
                    background=self.background,
                    random_expand=self.random_expand,
                    max_attempts=self.max_attempts,
                ),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class EvalSettings:
    threshold: float = 0.5
    prediction_mode: str = "tagged"
    box_select: str = "first"

    def __post_init__(self) -> None:
        if not (0 < self.threshold <= 1):
            raise ConfigError(f"eval threshold must be in (0, 1], got {self.threshold}")
        if self.prediction_mode not in ("tagged", "bare"):
            raise ConfigError(f"unknown prediction_mode {self.prediction_mode!r}")
        if self.box_select not in ("first", "best"):
            raise ConfigError(f"unknown box_select {self.box_select!r}")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    source_manifest: Optional[str] = None
    out_dir: Optional[str] = None
    data_engine: DataEngineSettings = field(default_factory=DataEngineSettings)
    reward: RewardConfig = field(default_factory=RewardConfig)
    grpo: GrpoConfig = field(default_factory=GrpoConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)

    def to_json(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "source_manifest": self.source_manifest,
            "out_dir": self.out_dir,
            "data_engine": asdict(self.data_engine),
            "reward": asdict(self.reward),
            "grpo": asdict(self.grpo),
            "eval": asdict(self.eval),
        }


def _build_section(cls: type, obj: Any, section: str) -> Any:
    if not isinstance(obj, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    coerced = dict(obj)
    for f in fields(cls):
        if f.name in coerced and isinstance(coerced[f.name], list):
            coerced[f.name] = tuple(coerced[f.name])
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {section!r} section: {exc}") from exc


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a pipeline config file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")

    known_top = {"seed", "source_manifest", "out_dir", "data_engine", "reward", "grpo", "eval"}
    unknown = set(obj) - known_top
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    cfg = PipelineConfig(
        seed=int(obj.get("seed", 0)),
        source_manifest=obj.get("source_manifest"),
        out_dir=obj.get("out_dir"),
        data_engine=_build_section(DataEngineSettings, obj.get("data_engine", {}), "data_engine"),
        reward=_build_section(RewardConfig, obj.get("reward", {}), "reward"),
        grpo=_build_section(GrpoConfig, obj.get("grpo", {}), "grpo"),
        eval=_build_section(EvalSettings, obj.get("eval", {}), "eval"),
    )
    # Surface bad values and dead paths at load rather than mid-pipeline.
    cfg.data_engine.to_synthesis_config(cfg.seed)
    if cfg.source_manifest is not None and not Path(cfg.source_manifest).is_file():
        raise ConfigError(f"source_manifest {cfg.source_manifest!r} does not exist")
    return cfg


def override(config: Any, **updates: Any) -> Any:
    """Replace dataclass fields with any non-None override values."""
    actual = {k: v for k, v in updates.items() if v is not None}
    if not actual:
        return config
    try:
        return replace(config, **actual)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
