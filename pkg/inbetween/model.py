"""
Generator and Critic Networks

The generator maps two frames and an inspiration latent to the frame midway
between them:

1. The scenario encoder reads the start frame stacked with the difference
   image (2·C channels) through four stride-2 convolutions and projects the
   result to a scenario code.
2. The transform head reads [code, z] and emits P affine transforms.
3. The mask decoder reads [code, z] and emits P softmax-normalized masks.
4. The start frame is warped by every transform and the P results are merged
   through the masks.

The critic scores a whole clip (frames stacked along channels) with four
stride-2 convolutions and a linear head, without an output nonlinearity.

All widths below are for ``width_divisor = 1`` and a 64×64 input; every
channel count is divided by ``width_divisor``.

    encoder   conv 2C→32→64→128→256 (k4 s2 p1, leaky 0.2), dense → Ds
    transform dense (Ds+Dz)→256 (leaky), dense 256→6P
    mask      dense (Ds+Dz)→128·(H/8)² (leaky), tconv 128→64→32→P, softmax
    critic    conv T·C→64→128→256→512 (k4 s2 p1, leaky 0.2), dense → 1
"""

import hashlib
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np

from .config import TrainConfig
from .logging_config import get_logger
from .merge import merge_masked
from .tensor import (
    ShapeError,
    Tensor,
    concat_channels,
    conv2d,
    dense,
    leaky_relu,
    reshape,
    slice_channels,
    softmax_channels,
    sub,
    transposed_conv2d,
)
from .warp import warp_image


KERNEL = 4
STRIDE = 2
PADDING = 1
TRANSFORM_HIDDEN = 256
IDENTITY_PARAMS = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])

FrameLike = Union[Tensor, np.ndarray]

logger = get_logger("model")


@dataclass
class VideoClip:
    """A clip of frames ``[T, C, H, W]`` with values clamped to [0, 1]."""

    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 4:
            raise ShapeError(f"VideoClip frames must be [T, C, H, W], got {frames.shape}")
        self.frames = np.clip(frames, 0.0, 1.0)

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_shape(self) -> Tuple[int, int, int]:
        return tuple(self.frames.shape[1:])

    def __getitem__(self, index: int) -> np.ndarray:
        return self.frames[index]


@dataclass
class GeneratorInput:
    """Batched generator input; ``difference`` is recorded on the tape as ``end - start``."""

    start_frame: Tensor
    end_frame: Tensor
    difference: Tensor
    latent: Tensor

    def encoder_input(self) -> Tensor:
        return concat_channels([self.start_frame, self.difference])


@dataclass
class ScenarioCode:
    code: Tensor

    def __post_init__(self):
        if not np.all(np.isfinite(self.code.data)):
            raise ValueError("scenario code contains non-finite values")


class ModelParams:
    """
    Named parameter tensors of all four networks.

    Names are dotted (``encoder.conv1.weight``) and their order is stable, so
    the same names address tensors in checkpoints and optimizer state.
    ``group`` returns views that share tensors with the parent.
    """

    GENERATOR_PREFIXES = ("encoder.", "transform.", "mask.")
    CRITIC_PREFIXES = ("critic.",)

    def __init__(self, tensors: "OrderedDict[str, Tensor]", config: TrainConfig):
        self.tensors = tensors
        self.config = config

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def names(self) -> List[str]:
        return list(self.tensors)

    def items(self):
        return self.tensors.items()

    def parameters(self) -> List[Tensor]:
        return list(self.tensors.values())

    def group(self, *prefixes: str) -> "ModelParams":
        subset = OrderedDict((k, v) for k, v in self.tensors.items() if k.startswith(prefixes))
        return ModelParams(subset, self.config)

    def generator(self) -> "ModelParams":
        return self.group(*self.GENERATOR_PREFIXES)

    def critic(self) -> "ModelParams":
        return self.group(*self.CRITIC_PREFIXES)

    def zero_grads(self) -> None:
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def count(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def astype(self, dtype) -> "ModelParams":
        """Independent copy with every tensor converted to ``dtype``."""
        return ModelParams(
            OrderedDict((k, Tensor(v.data.copy(), requires_grad=True, dtype=dtype, name=k))
                        for k, v in self.tensors.items()),
            self.config,
        )

    def copy(self) -> "ModelParams":
        return self.astype(np.float32)

    def arrays(self) -> Dict[str, np.ndarray]:
        return OrderedDict((k, v.data) for k, v in self.tensors.items())

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray], config: TrainConfig) -> "ModelParams":
        return cls(
            OrderedDict((k, Tensor(np.array(v, dtype=np.float32), requires_grad=True, name=k))
                        for k, v in arrays.items()),
            config,
        )

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name, tensor in self.tensors.items():
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(tensor.data).tobytes())
        return digest.hexdigest()


def parameter_shapes(config: TrainConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    """Shapes of every parameter tensor, in canonical order."""
    c = config.channels
    p = config.num_transforms
    size = config.image_size
    joint = config.scenario_dim + config.latent_dim
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()

    in_ch = 2 * c
    for index, out_ch in enumerate(config.enc_channels, start=1):
        shapes[f"encoder.conv{index}.weight"] = (out_ch, in_ch, KERNEL, KERNEL)
        shapes[f"encoder.conv{index}.bias"] = (out_ch,)
        in_ch = out_ch
    flat = in_ch * (size // 16) ** 2
    shapes["encoder.proj.weight"] = (config.scenario_dim, flat)
    shapes["encoder.proj.bias"] = (config.scenario_dim,)

    shapes["transform.fc1.weight"] = (TRANSFORM_HIDDEN, joint)
    shapes["transform.fc1.bias"] = (TRANSFORM_HIDDEN,)
    shapes["transform.fc2.weight"] = (6 * p, TRANSFORM_HIDDEN)
    shapes["transform.fc2.bias"] = (6 * p,)

    dec = config.dec_channels
    shapes["mask.proj.weight"] = (dec[0] * (size // 8) ** 2, joint)
    shapes["mask.proj.bias"] = (dec[0] * (size // 8) ** 2,)
    for index, (cin, cout) in enumerate(zip(dec, dec[1:] + [p]), start=1):
        shapes[f"mask.deconv{index}.weight"] = (cin, cout, KERNEL, KERNEL)
        shapes[f"mask.deconv{index}.bias"] = (cout,)

    in_ch = config.t_len * c
    for index, out_ch in enumerate(config.critic_channels, start=1):
        shapes[f"critic.conv{index}.weight"] = (out_ch, in_ch, KERNEL, KERNEL)
        shapes[f"critic.conv{index}.bias"] = (out_ch,)
        in_ch = out_ch
    shapes["critic.fc.weight"] = (1, in_ch * (size // 16) ** 2)
    shapes["critic.fc.bias"] = (1,)
    return shapes


def _fan_in(name: str, shape: Tuple[int, ...]) -> int:
    if len(shape) == 2:
        return shape[1]
    if ".deconv" in name:
        # each output pixel of a stride-2 transposed conv sees a quarter of the kernel taps
        return shape[0] * shape[2] * shape[3] // (STRIDE * STRIDE)
    return shape[1] * shape[2] * shape[3]


def init_params(seed: int, config: TrainConfig) -> ModelParams:
    """
    Initialize all parameters deterministically.

    Weights are He-uniform in ``±sqrt(6 / fan_in)``; biases are zero. The
    transform head's last layer has zero weights and a bias that spells the
    identity transform P times, so every transform starts at identity.

    Args:
        seed: Seed for the parameter generator
        config: Training configuration fixing all shapes

    Returns:
        ModelParams with float32 tensors
    """
    rng = np.random.default_rng(seed)
    tensors: "OrderedDict[str, Tensor]" = OrderedDict()
    for name, shape in parameter_shapes(config).items():
        if name == "transform.fc2.weight":
            data = np.zeros(shape)
        elif name == "transform.fc2.bias":
            data = np.tile(IDENTITY_PARAMS, config.num_transforms)
        elif name.endswith(".bias"):
            data = np.zeros(shape)
        else:
            bound = np.sqrt(6.0 / _fan_in(name, shape))
            data = rng.uniform(-bound, bound, size=shape)
        tensors[name] = Tensor(data, requires_grad=True, name=name)
    params = ModelParams(tensors, config)
    logger.debug(f"Initialized {len(params)} parameter tensors ({params.count()} values) with seed {seed}")
    return params


def _as_frame(frame: FrameLike) -> Tensor:
    if isinstance(frame, Tensor):
        return frame
    return Tensor(np.asarray(frame, dtype=np.float32))


def _check_unit_range(label: str, frame: Tensor, tolerance: float = 1e-4) -> None:
    data = frame.data
    if data.size and (data.min() < -tolerance or data.max() > 1.0 + tolerance):
        raise ValueError(f"{label} values must lie in [0, 1], got [{data.min():.4g}, {data.max():.4g}]")


def build_generator_input(f_start: FrameLike, f_end: FrameLike, z: FrameLike) -> GeneratorInput:
    """
    Assemble a batched generator input.

    Frames may be ``[C, H, W]`` or ``[N, C, H, W]``; the latent ``[Dz]`` or
    ``[N, Dz]``. Unbatched inputs gain a batch axis of 1.
    """
    f_start = _as_frame(f_start)
    f_end = _as_frame(f_end)
    z = _as_frame(z)
    if f_start.shape != f_end.shape:
        raise ShapeError(f"start frame {f_start.shape} and end frame {f_end.shape} differ in shape")
    if f_start.ndim == 3:
        f_start = reshape(f_start, (1,) + f_start.shape)
        f_end = reshape(f_end, (1,) + f_end.shape)
    if f_start.ndim != 4:
        raise ShapeError(f"frames must be [C, H, W] or [N, C, H, W], got {f_start.shape}")
    if z.ndim == 1:
        z = reshape(z, (1, z.shape[0]))
    if z.ndim != 2 or z.shape[0] != f_start.shape[0]:
        raise ShapeError(f"latent batch {z.shape} does not match frame batch {f_start.shape[0]}")
    _check_unit_range("start frame", f_start)
    _check_unit_range("end frame", f_end)
    return GeneratorInput(f_start, f_end, sub(f_end, f_start), z)


def encode_scenario(params: ModelParams, inputs: GeneratorInput) -> ScenarioCode:
    """Encode [start, difference] into a scenario code ``[N, Ds]``."""
    config = params.config
    x = inputs.encoder_input()
    expected = 2 * config.channels
    if x.shape[1] != expected:
        raise ShapeError(f"encoder expects {expected} input channels, got {x.shape[1]}")
    if x.shape[2:] != (config.image_size, config.image_size):
        raise ShapeError(
            f"encoder expects {config.image_size}x{config.image_size} frames, got {x.shape[2]}x{x.shape[3]}"
        )
    for index in range(1, len(config.enc_channels) + 1):
        x = conv2d(x, params[f"encoder.conv{index}.weight"], params[f"encoder.conv{index}.bias"],
                   stride=STRIDE, padding=PADDING)
        x = leaky_relu(x, config.leaky_slope)
    x = reshape(x, (x.shape[0], -1))
    code = dense(x, params["encoder.proj.weight"], params["encoder.proj.bias"])
    return ScenarioCode(code)


def _joint_features(params: ModelParams, code: ScenarioCode, z: Tensor) -> Tensor:
    if z.ndim != 2 or z.shape[1] != params.config.latent_dim:
        raise ShapeError(f"latent must be [N, {params.config.latent_dim}], got {z.shape}")
    return concat_channels([code.code, z])


def generate_transforms(params: ModelParams, code: ScenarioCode, z: Tensor) -> List[Tensor]:
    """
    Emit P affine transforms from [code, z].

    Returns:
        P tensors of shape ``[N, 2, 3]``
    """
    config = params.config
    h = _joint_features(params, code, z)
    h = leaky_relu(dense(h, params["transform.fc1.weight"], params["transform.fc1.bias"]),
                   config.leaky_slope)
    out = dense(h, params["transform.fc2.weight"], params["transform.fc2.bias"])
    n = out.shape[0]
    out = reshape(out, (n, config.num_transforms, 6))
    return [reshape(slice_channels(out, p, p + 1), (n, 2, 3)) for p in range(config.num_transforms)]


def decode_masks(params: ModelParams, code: ScenarioCode, z: Tensor) -> Tensor:
    """Emit the mask stack ``[N, P, H, W]``, softmax-normalized over P."""
    config = params.config
    h = _joint_features(params, code, z)
    h = leaky_relu(dense(h, params["mask.proj.weight"], params["mask.proj.bias"]), config.leaky_slope)
    side = config.image_size // 8
    x = reshape(h, (h.shape[0], config.dec_channels[0], side, side))
    layers = len(config.dec_channels)
    for index in range(1, layers + 1):
        x = transposed_conv2d(x, params[f"mask.deconv{index}.weight"], params[f"mask.deconv{index}.bias"],
                              stride=STRIDE, padding=PADDING)
        if index < layers:
            x = leaky_relu(x, config.leaky_slope)
    return softmax_channels(x)


def generate_midpoint_frame(params: ModelParams, f_start: FrameLike, f_end: FrameLike,
                            z: FrameLike) -> Tensor:
    """
    One full generator pass producing the frame midway between two frames.

    The merged frame is a convex combination of warped copies of the start
    frame, so it stays in [0, 1] without clamping.

    Args:
        params: Model parameters (only generator tensors are read)
        f_start: Start frame ``[C, H, W]`` or batch ``[N, C, H, W]``
        f_end: End frame, same shape
        z: Inspiration latent ``[Dz]`` or ``[N, Dz]``

    Returns:
        Frame with the shape of ``f_start``
    """
    unbatched = _as_frame(f_start).ndim == 3
    inputs = build_generator_input(f_start, f_end, z)
    code = encode_scenario(params, inputs)
    transforms = generate_transforms(params, code, inputs.latent)
    masks = decode_masks(params, code, inputs.latent)
    warped = [warp_image(inputs.start_frame, t) for t in transforms]
    frame = merge_masked(warped, masks)
    if unbatched:
        frame = reshape(frame, frame.shape[1:])
    return frame


def _critic_input(params: ModelParams,
                  clip: Union[VideoClip, Tensor, np.ndarray, Sequence[Tensor]]) -> Tensor:
    config = params.config
    if isinstance(clip, VideoClip):
        x = Tensor(clip.frames.reshape((1, -1) + clip.frames.shape[2:]))
    elif isinstance(clip, (list, tuple)):
        if len(clip) != config.t_len:
            raise ShapeError(f"critic expects {config.t_len} frames, got {len(clip)}")
        x = concat_channels(list(clip))
    else:
        x = _as_frame(clip)
        if x.ndim == 5:
            x = reshape(x, (x.shape[0], x.shape[1] * x.shape[2]) + x.shape[3:])
    expected = config.t_len * config.channels
    if x.ndim != 4 or x.shape[1] != expected:
        raise ShapeError(f"critic expects [N, {expected}, H, W] stacked frames, got {x.shape}")
    if x.shape[2:] != (config.image_size, config.image_size):
        raise ShapeError(f"critic expects {config.image_size}x{config.image_size} frames, got {x.shape[2:]}")
    return x


def criticize_clip(params: ModelParams,
                   clip: Union[VideoClip, Tensor, np.ndarray, Sequence[Tensor]]) -> Tensor:
    """
    Score clips with the Wasserstein critic.

    Args:
        params: Model parameters (only critic tensors are read)
        clip: A VideoClip, a list of T frame batches ``[N, C, H, W]``, stacked
            frames ``[N, T*C, H, W]`` or ``[N, T, C, H, W]``

    Returns:
        Raw scores ``[N]``
    """
    config = params.config
    x = _critic_input(params, clip)
    for index in range(1, len(config.critic_channels) + 1):
        x = conv2d(x, params[f"critic.conv{index}.weight"], params[f"critic.conv{index}.bias"],
                   stride=STRIDE, padding=PADDING)
        x = leaky_relu(x, config.leaky_slope)
    x = reshape(x, (x.shape[0], -1))
    scores = dense(x, params["critic.fc.weight"], params["critic.fc.bias"])
    return reshape(scores, (scores.shape[0],))


def critic_output_bound(params: ModelParams, input_bound: float = 1.0) -> float:
    """
    Interval bound on |critic score| for inputs with ``|x| <= input_bound``.

    Each layer maps a bound B on its input magnitudes to
    ``max_out (sum |w| * B + |b|)``; leaky_relu never increases magnitude.
    """
    config = params.config
    bound = float(input_bound)
    for index in range(1, len(config.critic_channels) + 1):
        weight = np.abs(params[f"critic.conv{index}.weight"].data.astype(np.float64))
        bias = np.abs(params[f"critic.conv{index}.bias"].data.astype(np.float64))
        bound = float(np.max(weight.sum(axis=(1, 2, 3)) * bound + bias))
    weight = np.abs(params["critic.fc.weight"].data.astype(np.float64))
    bias = np.abs(params["critic.fc.bias"].data.astype(np.float64))
    return float(np.max(weight.sum(axis=1) * bound + bias))


def sample_latent(rng: np.random.Generator, batch: int, dim: int) -> Tensor:
    """Standard-Gaussian inspiration latents ``[batch, dim]``."""
    return Tensor(rng.standard_normal((batch, dim)))


def identity_transforms_at_init(params: ModelParams, atol: float = 0.0) -> bool:
    """True when the transform head emits identity transforms for every input."""
    weight = params["transform.fc2.weight"].data
    bias = params["transform.fc2.bias"].data
    expected = np.tile(IDENTITY_PARAMS, params.config.num_transforms)
    return bool(np.all(np.abs(weight) <= atol) and np.allclose(bias, expected, rtol=0.0, atol=atol))
