"""
inbetween

Generates plausible intermediate frames between two non-adjacent video frames
by warping the start frame with several learned affine transforms and merging
the results through learned masks. The generator is trained adversarially
against a Wasserstein critic that scores whole clips.
"""

__version__ = "0.1.0"
__description__ = "Two-frame video inbetweening with transformation-based generation"

from .config import ConfigError, RunConfig, TrainConfig
from .logging_config import get_logger, setup_logger
from .model import ModelParams, VideoClip, generate_midpoint_frame, init_params
from .inference import complete_sequence, diversity_score, sample_diverse_completions
from .tensor import ShapeError, Tensor, backward, no_grad

__all__ = [
    "ConfigError",
    "RunConfig",
    "TrainConfig",
    "get_logger",
    "setup_logger",
    "ModelParams",
    "VideoClip",
    "generate_midpoint_frame",
    "init_params",
    "complete_sequence",
    "diversity_score",
    "sample_diverse_completions",
    "ShapeError",
    "Tensor",
    "backward",
    "no_grad",
]
