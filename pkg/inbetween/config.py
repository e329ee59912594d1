"""
Configuration Management

Two layers:

* ``TrainConfig``: the validated hyperparameters of a run (pydantic). This
  is the block serialized into every checkpoint.
* ``RunConfig``: everything a command needs: a TrainConfig plus paths,
  logging and export options, assembled from several sources with precedence

  1. Command line arguments (highest priority)
  2. Configuration file (TOML or JSON)
  3. Environment variables and an optional ``.env`` file
  4. Default values (lowest priority)
"""

import os
import json
import argparse
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .logging_config import DEFAULT_FORMAT, LOG_LEVELS, get_logger


DATASET_CHANNELS = {"shapes2d": 3, "moving-mnist": 1}
SHAPE_KINDS = ("circle", "square", "triangle")
VALID_LOG_LEVELS = list(LOG_LEVELS)
# per-invocation paths that a saved run config must not carry forward
RUN_ONLY_KEYS = ("paths_resume", "paths_checkpoint")


class ConfigError(ValueError):
    """Raised for invalid configuration values or unreadable config files."""


class TrainConfig(BaseModel):
    """Hyperparameters of a training run, also used to rebuild models at inference."""

    model_config = ConfigDict(extra="forbid")

    dataset: Literal["shapes2d", "moving-mnist"] = "shapes2d"
    learning_rate: float = 5e-5
    clip_c: float = 0.01
    n_critic: int = 5
    batch_size: int = 32
    iterations: int = 400
    seed: int = 0
    image_size: int = 64
    num_transforms: int = 4
    latent_dim: int = 100
    scenario_dim: int = 512
    t_len: int = 5
    width_divisor: int = 1
    leaky_slope: float = 0.2
    rmsprop_decay: float = 0.9
    rmsprop_eps: float = 1e-8
    per_pass_latent: bool = False
    shape_kinds: List[str] = list(SHAPE_KINDS)
    train_clips: Optional[int] = None
    test_clips: Optional[int] = None
    checkpoint_every: int = 500
    sample_every: int = 100
    log_every: int = 10
    workers: int = 1

    @field_validator("learning_rate")
    @classmethod
    def validate_learning_rate(cls, v):
        if v < 0:
            raise ValueError("learning_rate must be non-negative")
        return v

    @field_validator("clip_c")
    @classmethod
    def validate_clip(cls, v):
        if v <= 0:
            raise ValueError("clip_c must be positive")
        return v

    @field_validator("n_critic", "batch_size", "latent_dim", "scenario_dim", "width_divisor",
                     "checkpoint_every", "sample_every", "log_every", "workers")
    @classmethod
    def validate_positive(cls, v, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be at least 1")
        return v

    @field_validator("iterations")
    @classmethod
    def validate_iterations(cls, v):
        if v < 0:
            raise ValueError("iterations must be non-negative")
        return v

    @field_validator("num_transforms")
    @classmethod
    def validate_transforms(cls, v):
        if not 1 <= v <= 8:
            raise ValueError("num_transforms must be between 1 and 8")
        return v

    @field_validator("image_size")
    @classmethod
    def validate_image_size(cls, v):
        if v < 16 or v % 16:
            raise ValueError("image_size must be a multiple of 16 and at least 16")
        return v

    @field_validator("t_len")
    @classmethod
    def validate_t_len(cls, v):
        if v < 3:
            raise ValueError("t_len must be at least 3")
        return v

    @field_validator("leaky_slope")
    @classmethod
    def validate_slope(cls, v):
        if not 0 < v < 1:
            raise ValueError("leaky_slope must be in (0, 1)")
        return v

    @field_validator("rmsprop_decay")
    @classmethod
    def validate_decay(cls, v):
        if not 0 <= v < 1:
            raise ValueError("rmsprop_decay must be in [0, 1)")
        return v

    @field_validator("shape_kinds")
    @classmethod
    def validate_shape_kinds(cls, v):
        if not v:
            raise ValueError("shape_kinds must not be empty")
        unknown = [kind for kind in v if kind not in SHAPE_KINDS]
        if unknown:
            raise ValueError(f"unknown shape kinds {unknown}; choose from {list(SHAPE_KINDS)}")
        return v

    @model_validator(mode="after")
    def validate_dataset_geometry(self):
        if self.dataset == "moving-mnist" and self.image_size != 64:
            raise ValueError("moving-mnist clips are 64x64; set image_size = 64")
        if self.image_size // 8 < 1:
            raise ValueError("image_size too small for the mask decoder")
        return self

    @property
    def channels(self) -> int:
        return DATASET_CHANNELS[self.dataset]

    @property
    def enc_channels(self) -> List[int]:
        return [max(1, c // self.width_divisor) for c in (32, 64, 128, 256)]

    @property
    def critic_channels(self) -> List[int]:
        return [max(1, c // self.width_divisor) for c in (64, 128, 256, 512)]

    @property
    def dec_channels(self) -> List[int]:
        return [max(1, c // self.width_divisor) for c in (128, 64, 32)]


def _parse_bool(value: str) -> bool:
    return value.lower() in ("true", "1", "yes", "on")


class RunConfig:
    """
    Configuration of one command invocation.

    Nested tables in a config file are flattened (``[paths] out_dir`` becomes
    ``paths_out_dir``) except ``[train]``, which populates ``TrainConfig``.
    """

    SECTIONS = ("paths", "logging", "export")

    ENV_MAPPINGS = {
        "INBETWEEN_DATASET": ("train.dataset", str),
        "INBETWEEN_SEED": ("train.seed", int),
        "INBETWEEN_ITERATIONS": ("train.iterations", int),
        "INBETWEEN_BATCH_SIZE": ("train.batch_size", int),
        "INBETWEEN_WORKERS": ("train.workers", int),
        "INBETWEEN_MNIST_IDX": ("paths_mnist_idx", str),
        "INBETWEEN_OUT_DIR": ("paths_out_dir", str),
        "INBETWEEN_LOG_LEVEL": ("logging_level", str),
        "INBETWEEN_LOG_FILE": ("logging_file", str),
        "INBETWEEN_DEBUG": ("logging_debug", bool),
    }

    ARG_MAPPINGS = {
        "dataset": "train.dataset",
        "seed": "train.seed",
        "iterations": "train.iterations",
        "mnist_idx": "paths_mnist_idx",
        "out": "paths_out_dir",
        "resume": "paths_resume",
        "checkpoint": "paths_checkpoint",
        "log_level": "logging_level",
        "log_file": "logging_file",
        "debug": "logging_debug",
    }

    def __init__(self, config_file: Optional[str] = None, args: Optional[argparse.Namespace] = None,
                 env_file: Optional[str] = ".env"):
        """
        Initialize configuration.

        Args:
            config_file: Path to a TOML or JSON configuration file
            args: Parsed command line arguments
            env_file: Optional dotenv file consulted alongside the environment
        """
        self.logger = get_logger("config")
        self._set_defaults()
        self._load_from_env(env_file)
        if config_file:
            self._load_from_file(config_file)
        if args:
            self._load_from_args(args)
        self._validate()
        self.logger.debug(f"Configuration loaded: dataset={self.train.dataset}, seed={self.train.seed}")

    def _set_defaults(self) -> None:
        self.train = TrainConfig()

        self.paths_mnist_idx: Optional[str] = None
        self.paths_out_dir = "runs/default"
        self.paths_resume: Optional[str] = None
        self.paths_checkpoint: Optional[str] = None

        self.logging_level = "INFO"
        self.logging_file: Optional[str] = None
        self.logging_format = DEFAULT_FORMAT
        self.logging_debug = False

        self.export_frame_ms = 150
        self.export_grid_clips = 8

    def _set(self, target: str, value: Any) -> None:
        if target.startswith("train."):
            self._update_train({target.split(".", 1)[1]: value})
        else:
            setattr(self, target, value)

    def _update_train(self, updates: Dict[str, Any]) -> None:
        try:
            self.train = TrainConfig(**{**self.train.model_dump(), **updates})
        except ValidationError as e:
            raise ConfigError(f"Invalid training configuration: {e}")

    def _load_from_env(self, env_file: Optional[str]) -> None:
        environment: Dict[str, Optional[str]] = {}
        if env_file and Path(env_file).is_file():
            environment.update(dotenv_values(env_file))
        environment.update(os.environ)

        for env_var, (target, target_type) in self.ENV_MAPPINGS.items():
            env_value = environment.get(env_var)
            if env_value is None:
                continue
            try:
                if target_type is bool:
                    value = _parse_bool(env_value)
                elif target_type is int:
                    value = int(env_value)
                else:
                    value = env_value
                self._set(target, value)
                self.logger.debug(f"Loaded from env {env_var}: {target}={value}")
            except (ValueError, TypeError) as e:
                self.logger.warning(f"Invalid environment variable {env_var}={env_value}: {e}")

    def _load_from_file(self, config_file: str) -> None:
        config_path = Path(config_file)
        if not config_path.is_file():
            raise ConfigError(f"Configuration file not found: {config_file}")
        try:
            if config_path.suffix.lower() == ".json":
                with open(config_path, "r", encoding="utf-8") as f:
                    config_data = json.load(f)
            else:
                with open(config_path, "rb") as f:
                    config_data = tomllib.load(f)
        except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"Invalid configuration file {config_file}: {e}")

        train_values = config_data.pop("train", {})
        if not isinstance(train_values, dict):
            raise ConfigError(f"[train] in {config_file} must be a table")
        self._update_train(train_values)

        for key, value in self._flatten_config(config_data).items():
            if hasattr(self, key) and key.split("_", 1)[0] in self.SECTIONS:
                setattr(self, key, value)
                self.logger.debug(f"Loaded from file: {key}={value}")
            else:
                self.logger.warning(f"Unknown configuration key: {key}")

        self.logger.info(f"Configuration loaded from {config_file}")

    def _flatten_config(self, config_data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
        """
        Flatten nested configuration dictionary.

        Args:
            config_data: Nested configuration dictionary
            prefix: Prefix for flattened keys

        Returns:
            Flattened configuration dictionary
        """
        flat_config = {}
        for key, value in config_data.items():
            full_key = f"{prefix}_{key}" if prefix else key
            if isinstance(value, dict):
                flat_config.update(self._flatten_config(value, full_key))
            else:
                flat_config[full_key] = value
        return flat_config

    def _load_from_args(self, args: argparse.Namespace) -> None:
        for arg_name, target in self.ARG_MAPPINGS.items():
            value = getattr(args, arg_name, None)
            # store_true flags left unset must not override file values
            if value is None or value is False:
                continue
            self._set(target, value)
            self.logger.debug(f"Loaded from args: {target}={value}")

    def _validate(self) -> None:
        self.logging_level = str(self.logging_level).upper()
        if self.logging_level not in VALID_LOG_LEVELS:
            raise ConfigError(f"Invalid log level: {self.logging_level}. Must be one of {VALID_LOG_LEVELS}")
        if not isinstance(self.paths_out_dir, str) or not self.paths_out_dir:
            raise ConfigError(f"Invalid output directory: {self.paths_out_dir!r}")
        if int(self.export_frame_ms) <= 0:
            raise ConfigError(f"Invalid export_frame_ms: {self.export_frame_ms}")
        if int(self.export_grid_clips) <= 0:
            raise ConfigError(f"Invalid export_grid_clips: {self.export_grid_clips}")

    def to_dict(self, exclude: Sequence[str] = ()) -> Dict[str, Any]:
        """
        Nested dictionary form; ``None`` values are left out so TOML can hold it.

        Args:
            exclude: Flattened keys to leave out, e.g. ``paths_resume``

        Returns:
            Configuration as dictionary
        """
        config_dict: Dict[str, Any] = {"train": self.train.model_dump(exclude_none=True)}
        for section in self.SECTIONS:
            values = {}
            for attr_name, value in sorted(vars(self).items()):
                if attr_name in exclude:
                    continue
                if attr_name.startswith(f"{section}_") and value is not None:
                    values[attr_name[len(section) + 1:]] = value
            config_dict[section] = values
        return config_dict

    def save_to_file(self, config_file: str, exclude: Sequence[str] = ()) -> None:
        """
        Save current configuration to a TOML or JSON file (by extension).

        Args:
            config_file: Path to save configuration
            exclude: Flattened keys to leave out
        """
        config_dict = self.to_dict(exclude)
        if Path(config_file).suffix.lower() == ".json":
            with open(config_file, "w", encoding="utf-8") as f:
                json.dump(config_dict, f, indent=2, sort_keys=True)
        else:
            with open(config_file, "wb") as f:
                tomli_w.dump(config_dict, f)
        self.logger.info(f"Configuration saved to {config_file}")
