"""
Recursive midpoint completion.

A clip of length T is completed from its two end frames by generating the
frame at ``m = (t1 + t2) // 2`` for the interval ``(0, T-1)`` and recursing
into ``(t1, m)`` before ``(m, t2)`` until every interval is adjacent. Each
generator pass reads the boundary frames available at that point, so a
clip of length T takes exactly T - 2 passes. For T = 5 the order is
(0, 4) -> 2, (0, 2) -> 1, (2, 4) -> 3.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .logging_config import get_logger
from .model import FrameLike, ModelParams, VideoClip, generate_midpoint_frame, sample_latent
from .tensor import ShapeError, Tensor, no_grad


logger = get_logger("inference")


@dataclass
class CompletionRequest:
    """Two end frames ``[C, H, W]`` and how many diverse completions to draw."""

    f_start: np.ndarray
    f_end: np.ndarray
    t_len: int = 5
    samples: int = 1
    base_seed: int = 0
    per_pass_latent: bool = False

    def __post_init__(self):
        self.f_start = np.asarray(self.f_start, dtype=np.float32)
        self.f_end = np.asarray(self.f_end, dtype=np.float32)
        if self.f_start.shape != self.f_end.shape or self.f_start.ndim != 3:
            raise ShapeError(f"end frames must share a [C, H, W] shape, got {self.f_start.shape} "
                             f"and {self.f_end.shape}")
        if self.t_len < 3:
            raise ValueError(f"clip length must be at least 3, got {self.t_len}")
        if self.samples < 1:
            raise ValueError(f"number of samples must be at least 1, got {self.samples}")


class LatentSource:
    """
    Supplies the inspiration latent for each generator pass.

    By default one latent is drawn and shared by every pass of a completion;
    with ``per_pass=True`` each pass draws a fresh one.
    """

    def __init__(self, rng: np.random.Generator, batch: int, dim: int, per_pass: bool = False):
        self.rng = rng
        self.batch = batch
        self.dim = dim
        self.per_pass = per_pass
        self.calls = 0
        self._shared: Optional[Tensor] = None

    @classmethod
    def fixed(cls, z: Union[Tensor, np.ndarray]) -> "LatentSource":
        z = z if isinstance(z, Tensor) else Tensor(np.asarray(z, dtype=np.float32))
        if z.ndim == 1:
            z = Tensor(z.data[None])
        source = cls(np.random.default_rng(0), z.shape[0], z.shape[1])
        source._shared = z
        return source

    def next(self) -> Tensor:
        self.calls += 1
        if self.per_pass:
            return sample_latent(self.rng, self.batch, self.dim)
        if self._shared is None:
            self._shared = sample_latent(self.rng, self.batch, self.dim)
        return self._shared


def midpoint_schedule(t_len: int) -> List[Tuple[int, int, int]]:
    """``(t1, m, t2)`` for every generator pass, in execution order."""
    if t_len < 3:
        raise ValueError(f"clip length must be at least 3, got {t_len}")
    schedule: List[Tuple[int, int, int]] = []

    def fill(t1: int, t2: int) -> None:
        if t2 - t1 < 2:
            return
        m = (t1 + t2) // 2
        schedule.append((t1, m, t2))
        fill(t1, m)
        fill(m, t2)

    fill(0, t_len - 1)
    return schedule


def complete_frames(params: ModelParams, f_start: FrameLike, f_end: FrameLike, t_len: int,
                    latents: LatentSource) -> List[Tensor]:
    """
    Complete a batch of clips, keeping every generated frame on the tape.

    Args:
        params: Model parameters
        f_start: Start frames ``[N, C, H, W]``
        f_end: End frames ``[N, C, H, W]``
        t_len: Clip length
        latents: Latent supplier, asked once per generator pass

    Returns:
        ``t_len`` frame batches; the first and last are the inputs themselves
    """
    f_start = f_start if isinstance(f_start, Tensor) else Tensor(f_start)
    f_end = f_end if isinstance(f_end, Tensor) else Tensor(f_end)
    frames: List[Optional[Tensor]] = [None] * t_len
    frames[0] = f_start
    frames[-1] = f_end
    for t1, m, t2 in midpoint_schedule(t_len):
        frames[m] = generate_midpoint_frame(params, frames[t1], frames[t2], latents.next())
    return frames


def complete_sequence(params: ModelParams, f_start: FrameLike, f_end: FrameLike, t_len: int = 5,
                      z_source: Union[LatentSource, Tensor, np.ndarray, None] = None) -> VideoClip:
    """
    Complete one clip from its end frames ``[C, H, W]``.

    ``z_source`` may be a LatentSource, a fixed latent ``[Dz]``, or None for
    a latent drawn from seed 0.
    """
    start = f_start.data if isinstance(f_start, Tensor) else np.asarray(f_start, dtype=np.float32)
    end = f_end.data if isinstance(f_end, Tensor) else np.asarray(f_end, dtype=np.float32)
    if start.shape != end.shape or start.ndim != 3:
        raise ShapeError(f"end frames must share a [C, H, W] shape, got {start.shape} and {end.shape}")
    if z_source is None:
        z_source = LatentSource(np.random.default_rng(0), 1, params.config.latent_dim)
    elif not isinstance(z_source, LatentSource):
        z_source = LatentSource.fixed(z_source)

    with no_grad():
        frames = complete_frames(params, Tensor(start[None]), Tensor(end[None]), t_len, z_source)
    return VideoClip(np.stack([frame.data[0] for frame in frames]))


def sample_diverse_completions(params: ModelParams, request: CompletionRequest) -> List[VideoClip]:
    """
    Draw ``request.samples`` completions; sample j uses latents seeded by
    ``(base_seed, j)``.
    """
    clips = []
    for j in range(request.samples):
        latents = LatentSource(np.random.default_rng([request.base_seed, j]), 1,
                               params.config.latent_dim, per_pass=request.per_pass_latent)
        clips.append(complete_sequence(params, request.f_start, request.f_end, request.t_len, latents))
    logger.debug(f"Generated {len(clips)} completions of length {request.t_len}")
    return clips


def diversity_score(clips: Sequence[VideoClip]) -> float:
    """
    Mean pairwise RMS distance between the generated (interior) frames.

    For a pair the distance is ``||a - b||_2 / sqrt(n)`` with n the number of
    interior pixel values, so two clips differing by 1.0 at a single value
    score ``1 / sqrt(n)``.
    """
    if len(clips) < 2:
        raise ValueError(f"diversity needs at least 2 clips, got {len(clips)}")
    interiors = [np.asarray(clip.frames[1:-1], dtype=np.float64) for clip in clips]
    shape = interiors[0].shape
    for index, interior in enumerate(interiors):
        if interior.shape != shape:
            raise ShapeError(f"clip {index} has interior shape {interior.shape}, expected {shape}")
    n = interiors[0].size
    distances = [float(np.sqrt(np.sum((a - b) ** 2) / n)) for a, b in combinations(interiors, 2)]
    return float(np.mean(distances))
