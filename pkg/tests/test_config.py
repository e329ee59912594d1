"""
Tests for configuration loading and validation
"""

import argparse
import json
import os
import sys
from unittest.mock import patch

import pytest

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from inbetween.config import ConfigError, RunConfig, TrainConfig


class TestTrainConfig:
    """Hyperparameter validation."""

    def test_defaults(self):
        config = TrainConfig()
        assert config.learning_rate == 5e-5
        assert config.clip_c == 0.01
        assert config.n_critic == 5
        assert config.batch_size == 32
        assert config.num_transforms == 4
        assert config.latent_dim == 100
        assert config.scenario_dim == 512
        assert config.channels == 3

    def test_width_divisor_scales_channels(self):
        config = TrainConfig(width_divisor=4)
        assert config.enc_channels == [8, 16, 32, 64]
        assert config.critic_channels == [16, 32, 64, 128]
        assert config.dec_channels == [32, 16, 8]

    @pytest.mark.parametrize("field,value", [
        ("learning_rate", -1e-3),
        ("clip_c", 0.0),
        ("n_critic", 0),
        ("batch_size", 0),
        ("num_transforms", 0),
        ("num_transforms", 9),
        ("image_size", 40),
        ("t_len", 2),
        ("leaky_slope", 1.0),
        ("rmsprop_decay", 1.0),
        ("shape_kinds", ["hexagon"]),
    ])
    def test_invalid_values_rejected(self, field, value):
        with pytest.raises(ValueError):
            TrainConfig(**{field: value})

    def test_moving_mnist_needs_64_pixels(self):
        with pytest.raises(ValueError):
            TrainConfig(dataset="moving-mnist", image_size=32)
        assert TrainConfig(dataset="moving-mnist").channels == 1

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rat=1e-3)


class TestRunConfig:
    """Layered run configuration."""

    def setup_method(self):
        self.clean_env = {k: v for k, v in os.environ.items() if not k.startswith("INBETWEEN_")}

    def test_defaults(self):
        with patch.dict(os.environ, self.clean_env, clear=True):
            config = RunConfig(env_file=None)
        assert config.train == TrainConfig()
        assert config.paths_out_dir == "runs/default"
        assert config.logging_level == "INFO"
        assert config.export_frame_ms == 150

    def test_environment_overrides_defaults(self):
        env = dict(self.clean_env, INBETWEEN_SEED="7", INBETWEEN_LOG_LEVEL="debug", INBETWEEN_DEBUG="true")
        with patch.dict(os.environ, env, clear=True):
            config = RunConfig(env_file=None)
        assert config.train.seed == 7
        assert config.logging_level == "DEBUG"
        assert config.logging_debug is True

    def test_invalid_environment_value_is_ignored(self):
        env = dict(self.clean_env, INBETWEEN_SEED="seven")
        with patch.dict(os.environ, env, clear=True):
            config = RunConfig(env_file=None)
        assert config.train.seed == 0

    def test_dotenv_file(self, tmp_path):
        env_file = tmp_path / ".env"
        env_file.write_text("INBETWEEN_ITERATIONS=12\n")
        with patch.dict(os.environ, self.clean_env, clear=True):
            config = RunConfig(env_file=str(env_file))
        assert config.train.iterations == 12

    def test_toml_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(
            "[train]\nimage_size = 32\nwidth_divisor = 4\n\n"
            "[paths]\nout_dir = \"runs/small\"\n\n[export]\nframe_ms = 90\n"
        )
        with patch.dict(os.environ, self.clean_env, clear=True):
            config = RunConfig(str(path), env_file=None)
        assert config.train.image_size == 32
        assert config.train.width_divisor == 4
        assert config.paths_out_dir == "runs/small"
        assert config.export_frame_ms == 90

    def test_json_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"train": {"seed": 3}, "logging": {"level": "WARNING"}}))
        with patch.dict(os.environ, self.clean_env, clear=True):
            config = RunConfig(str(path), env_file=None)
        assert config.train.seed == 3
        assert config.logging_level == "WARNING"

    def test_arguments_override_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[train]\nseed = 3\n")
        args = argparse.Namespace(seed=11, out="elsewhere", debug=False, dataset=None)
        with patch.dict(os.environ, self.clean_env, clear=True):
            config = RunConfig(str(path), args, env_file=None)
        assert config.train.seed == 11
        assert config.paths_out_dir == "elsewhere"
        assert config.logging_debug is False

    def test_missing_file(self, tmp_path):
        with patch.dict(os.environ, self.clean_env, clear=True):
            with pytest.raises(ConfigError):
                RunConfig(str(tmp_path / "absent.toml"), env_file=None)

    def test_invalid_train_value_in_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[train]\nclip_c = -1.0\n")
        with patch.dict(os.environ, self.clean_env, clear=True):
            with pytest.raises(ConfigError):
                RunConfig(str(path), env_file=None)

    def test_invalid_log_level(self):
        args = argparse.Namespace(log_level="LOUD")
        with patch.dict(os.environ, self.clean_env, clear=True):
            with pytest.raises(ConfigError):
                RunConfig(args=args, env_file=None)

    def test_save_and_reload(self, tmp_path):
        with patch.dict(os.environ, self.clean_env, clear=True):
            original = RunConfig(args=argparse.Namespace(seed=21, iterations=33), env_file=None)
            for name in ("saved.toml", "saved.json"):
                original.save_to_file(str(tmp_path / name))
                reloaded = RunConfig(str(tmp_path / name), env_file=None)
                assert reloaded.train == original.train
                assert reloaded.paths_out_dir == original.paths_out_dir
                assert reloaded.export_grid_clips == original.export_grid_clips
