"""
End-to-end gradient checks on a reduced model (16×16 frames, widths / 8).

Checking every parameter by central differences would take minutes, so each
parameter group is checked along random unit directions: the analytic
directional derivative ``<grad, v>`` against ``(L(θ + h v) - L(θ - h v)) / 2h``.
A direction whose step crosses a leaky_relu or tent-kernel kink is redrawn.
"""

from typing import Callable

import numpy as np

from inbetween.config import TrainConfig
from inbetween.model import ModelParams, criticize_clip, generate_midpoint_frame, init_params
from inbetween.tensor import Tensor, backward, grads_finite, no_grad

from .autodiff_checks import projected
from .registry import gradcheck


DIRECTION_STEP = 1e-5
DIRECTION_RETRIES = 3
TOLERANCE = 1e-3


def reduced_config() -> TrainConfig:
    return TrainConfig(dataset="shapes2d", image_size=16, width_divisor=8, num_transforms=2,
                       latent_dim=8, scenario_dim=16, t_len=3)


def reduced_params(seed: int = 0) -> ModelParams:
    """float64 reduced model whose transform head no longer emits exact identities."""
    params = init_params(seed, reduced_config()).astype(np.float64)
    rng = np.random.default_rng([seed, 1])
    head = params["transform.fc2.weight"]
    head.data[...] = 0.005 * rng.standard_normal(head.shape)
    return params


def directional_error(loss_fn: Callable[[], Tensor], params: ModelParams, group: ModelParams,
                      seed: int, h: float = DIRECTION_STEP) -> float:
    """Smallest relative error over up to DIRECTION_RETRIES random directions."""
    best = np.inf
    for attempt in range(DIRECTION_RETRIES):
        rng = np.random.default_rng([seed, attempt])
        directions = {name: rng.standard_normal(t.shape) for name, t in group.items()}
        norm = np.sqrt(sum(float(np.sum(d * d)) for d in directions.values()))
        directions = {name: d / norm for name, d in directions.items()}

        params.zero_grads()
        backward(loss_fn())
        if not grads_finite(group.parameters()):
            return np.inf
        analytic = sum(float(np.sum(group[name].grad * d)) for name, d in directions.items())

        originals = {name: group[name].data.copy() for name in directions}
        values = []
        with no_grad():
            for sign in (1.0, -1.0):
                for name, d in directions.items():
                    group[name].data[...] = originals[name] + sign * h * d
                values.append(loss_fn().item())
        for name, original in originals.items():
            group[name].data[...] = original
        numeric = (values[0] - values[1]) / (2.0 * h)

        error = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)
        best = min(best, error)
        if best < TOLERANCE:
            break
    params.zero_grads()
    return float(best)


def _generator_loss_fn(params: ModelParams, seed: int) -> Callable[[], Tensor]:
    rng = np.random.default_rng(seed)
    config = params.config
    shape = (2, config.channels, config.image_size, config.image_size)
    f_start = Tensor(rng.uniform(0.0, 1.0, size=shape), dtype=np.float64)
    f_end = Tensor(rng.uniform(0.0, 1.0, size=shape), dtype=np.float64)
    z = Tensor(rng.standard_normal((2, config.latent_dim)), dtype=np.float64)
    return lambda: projected(generate_midpoint_frame(params, f_start, f_end, z))


def _generator_group_check(prefix: str, seed: int) -> float:
    params = reduced_params()
    return directional_error(_generator_loss_fn(params, seed), params, params.group(prefix), seed)


@gradcheck("model_encoder", "midpoint frame w.r.t. encoder parameters", category="model")
def check_model_encoder() -> float:
    return _generator_group_check("encoder.", 31)


@gradcheck("model_transform", "midpoint frame w.r.t. transform-head parameters", category="model")
def check_model_transform() -> float:
    return _generator_group_check("transform.", 32)


@gradcheck("model_mask", "midpoint frame w.r.t. mask-decoder parameters", category="model")
def check_model_mask() -> float:
    return _generator_group_check("mask.", 33)


@gradcheck("model_critic", "critic score w.r.t. critic parameters", category="model")
def check_model_critic() -> float:
    params = reduced_params()
    config = params.config
    rng = np.random.default_rng(34)
    clip = Tensor(rng.uniform(0.0, 1.0, size=(2, config.t_len * config.channels,
                                             config.image_size, config.image_size)), dtype=np.float64)
    return directional_error(lambda: projected(criticize_clip(params, clip)), params, params.critic(), 34)
