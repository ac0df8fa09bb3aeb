"""Pipeline config loading, validation, and flag overrides."""

from __future__ import annotations

import json

import pytest

from groundrl.config import (
    DataEngineSettings,
    EvalSettings,
    PipelineConfig,
    load_pipeline_config,
    override,
)
from groundrl.errors import ConfigError
from groundrl.grpo import GrpoConfig
from groundrl.records import Layout


def write_config(tmp_path, payload) -> str:
    path = tmp_path / "pipeline.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


class TestLoad:
    def test_defaults_from_empty_object(self, tmp_path):
        cfg = load_pipeline_config(write_config(tmp_path, {}))
        assert cfg.seed == 0
        assert cfg.grpo == GrpoConfig()
        assert cfg.eval == EvalSettings()
        assert cfg.data_engine == DataEngineSettings()

    def test_full_round_trip(self, tmp_path):
        payload = {
            "seed": 9,
            "data_engine": {"n_scenes": 50, "stage1_fraction": 0.7, "layouts": ["grid"]},
            "reward": {"tau": 0.4, "w_iou": 2.0},
            "grpo": {"group_size": 8, "beta": 0.1, "iterations": 10},
            "eval": {"threshold": 0.6, "prediction_mode": "bare"},
        }
        cfg = load_pipeline_config(write_config(tmp_path, payload))
        assert cfg.seed == 9
        assert cfg.data_engine.n_scenes == 50
        assert cfg.reward.tau == 0.4
        assert cfg.grpo.group_size == 8
        assert cfg.eval.threshold == 0.6
        syn = cfg.data_engine.to_synthesis_config(cfg.seed)
        assert syn.layouts == (Layout.GRID,)
        echoed = cfg.to_json()
        assert echoed["grpo"]["beta"] == 0.1

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_pipeline_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_pipeline_config(path)

    @pytest.mark.parametrize(
        "payload",
        [
            {"grpo": {"group_size": 1}},
            {"reward": {"tau": 2.0}},
            {"eval": {"prediction_mode": "telepathy"}},
            {"data_engine": {"n_scenes": 0}},
            {"data_engine": {"stage1_fraction": 1.5}},
            {"unknown_section": {}},
            {"grpo": {"group_siz": 4}},
        ],
    )
    def test_bad_values_rejected_at_load(self, tmp_path, payload):
        with pytest.raises(ConfigError):
            load_pipeline_config(write_config(tmp_path, payload))

    def test_dead_source_path_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_pipeline_config(
                write_config(tmp_path, {"source_manifest": str(tmp_path / "gone.jsonl")})
            )

    def test_existing_source_path_accepted(self, tmp_path):
        manifest = tmp_path / "src.jsonl"
        manifest.write_text("", encoding="utf-8")
        cfg = load_pipeline_config(write_config(tmp_path, {"source_manifest": str(manifest)}))
        assert cfg.source_manifest == str(manifest)


class TestOverride:
    def test_none_values_keep_config(self):
        base = GrpoConfig()
        assert override(base, beta=None, iterations=None) is base

    def test_non_none_values_replace(self):
        out = override(GrpoConfig(), beta=0.2, iterations=7)
        assert out.beta == 0.2 and out.iterations == 7

    def test_invalid_override_is_config_error(self):
        with pytest.raises(ConfigError):
            override(GrpoConfig(), group_size=0)

    def test_section_validation_runs_on_override(self):
        with pytest.raises(ConfigError):
            override(EvalSettings(), threshold=7.0)


def test_pipeline_config_echo_is_json_serializable():
    payload = PipelineConfig().to_json()
    json.dumps(payload)
    assert set(payload) == {
        "seed", "source_manifest", "out_dir", "data_engine", "reward", "grpo", "eval",
    }
