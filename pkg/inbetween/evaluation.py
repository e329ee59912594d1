"""
Evaluation helpers: pixel metrics, centroid geometry, loss trends and
parameter counts.

MSE and PSNR against the held-out interior frames are reference numbers
only; a plausible completion need not match the real one.
"""

import math
from collections import OrderedDict
from typing import Dict, List, Sequence

import numpy as np

from .config import TrainConfig
from .datasets import ClipSource, frame_centroid
from .inference import CompletionRequest, diversity_score, sample_diverse_completions
from .logging_config import get_logger
from .model import ModelParams, VideoClip, parameter_shapes
from .reports import EvalReport


logger = get_logger("evaluation")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"mse: shapes {a.shape} and {b.shape} differ")
    return float(np.mean((a - b) ** 2))


def psnr(a: np.ndarray, b: np.ndarray, max_value: float = 1.0) -> float:
    error = mse(a, b)
    if error == 0.0:
        return math.inf
    return float(10.0 * math.log10(max_value * max_value / error))


def object_centroid(frame: np.ndarray) -> np.ndarray:
    """``(row, col)`` of the intensity-weighted object centre of a ``[C, H, W]`` frame."""
    return np.array(frame_centroid(frame))


def distance_to_segment(point: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    length = float(np.dot(ab, ab))
    if length == 0.0:
        return float(np.linalg.norm(point - a))
    t = min(1.0, max(0.0, float(np.dot(point - a, ab)) / length))
    return float(np.linalg.norm(point - (a + t * ab)))


def midpoint_on_segment_rate(clips: Sequence[VideoClip], tolerance: float = 2.0) -> float:
    """
    Fraction of completions whose middle frame's centroid lies within
    ``tolerance`` pixels of the segment joining the end-frame centroids.
    """
    if not clips:
        raise ValueError("midpoint_on_segment_rate needs at least one clip")
    hits = 0
    for clip in clips:
        start = object_centroid(clip.frames[0])
        end = object_centroid(clip.frames[-1])
        middle = object_centroid(clip.frames[clip.length // 2])
        if np.all(np.isfinite(middle)) and distance_to_segment(middle, start, end) <= tolerance:
            hits += 1
    return hits / len(clips)


def loss_trend_shrinking(loss_d: Sequence[float], window: int = 200) -> bool:
    """True when the mean |loss_d| of the last ``window`` steps is below that of the first."""
    values = np.abs(np.asarray(loss_d, dtype=np.float64))
    window = min(window, len(values) // 2)
    if window < 1:
        raise ValueError(f"need at least 2 loss values, got {len(values)}")
    return bool(values[-window:].mean() < values[:window].mean())


def count_parameters(config: TrainConfig) -> Dict[str, int]:
    """Parameter count per network plus the generator and overall totals."""
    counts: Dict[str, int] = OrderedDict((name, 0) for name in ("encoder", "transform", "mask", "critic"))
    for name, shape in parameter_shapes(config).items():
        counts[name.split(".", 1)[0]] += int(np.prod(shape))
    counts["generator"] = counts["encoder"] + counts["transform"] + counts["mask"]
    counts["total"] = counts["generator"] + counts["critic"]
    return counts


def evaluate_completions(params: ModelParams, source: ClipSource, clips: int, samples: int,
                         base_seed: int = 0) -> EvalReport:
    """
    Complete ``clips`` held-out clips ``samples`` times each.

    Diversity is averaged over clips (0 when ``samples`` is 1); MSE and PSNR
    compare every sample's interior frames with the real ones.
    """
    config = params.config
    diversities: List[float] = []
    errors: List[float] = []
    for clip_index in list(source.indices())[:clips]:
        real = source.clip(clip_index)
        request = CompletionRequest(real.frames[0], real.frames[-1], t_len=config.t_len, samples=samples,
                                    base_seed=base_seed, per_pass_latent=config.per_pass_latent)
        completions = sample_diverse_completions(params, request)
        if samples > 1:
            diversities.append(diversity_score(completions))
        errors.extend(mse(c.frames[1:-1], real.frames[1:-1]) for c in completions)

    mean_error = float(np.mean(errors)) if errors else 0.0
    report = EvalReport(
        dataset=config.dataset,
        clips=min(clips, source.size),
        samples=samples,
        diversity=float(np.mean(diversities)) if diversities else 0.0,
        mse=mean_error,
        psnr=math.inf if mean_error == 0.0 else 10.0 * math.log10(1.0 / mean_error),
    )
    logger.info(f"Evaluated {report.clips} clips: diversity={report.diversity:.6f} mse={report.mse:.6f}")
    return report
