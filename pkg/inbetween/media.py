"""
PNG, GIF and sample-grid export through Pillow.

Frames are float arrays ``[C, H, W]`` in [0, 1] with C = 1 (grayscale) or
C = 3 (RGB); files are 8-bit.
"""

from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from PIL import Image

from .logging_config import get_logger
from .tensor import ShapeError


PathLike = Union[str, Path]

# PNG modes accepted for a frame of each channel count
CHANNEL_MODES = {1: ("L",), 3: ("RGB", "RGBA")}

logger = get_logger("media")


def to_uint8(frame: np.ndarray) -> np.ndarray:
    """``[C, H, W]`` floats to an 8-bit ``[H, W]`` or ``[H, W, 3]`` array."""
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[0] not in (1, 3):
        raise ShapeError(f"frames must be [1|3, H, W], got {frame.shape}")
    pixels = np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)
    if frame.shape[0] == 1:
        return pixels[0]
    return np.ascontiguousarray(np.transpose(pixels, (1, 2, 0)))


def frame_to_image(frame: np.ndarray) -> Image.Image:
    # uint8 [H, W] maps to mode L, [H, W, 3] to RGB
    return Image.fromarray(to_uint8(frame))


def save_png(frame: np.ndarray, path: PathLike) -> None:
    frame_to_image(frame).save(path, format="PNG")


def load_png(path: PathLike, channels: int, size: int) -> np.ndarray:
    """
    Read a PNG as a ``[channels, size, size]`` frame in [0, 1].

    Raises:
        ValueError: When the image cannot be read or its size or channel
            count differs
    """
    if channels not in CHANNEL_MODES:
        raise ShapeError(f"frames have 1 or 3 channels, got {channels}")
    expected = f"expected {size}x{size} with {channels} channel(s)"
    try:
        with Image.open(path) as image:
            if image.mode not in CHANNEL_MODES[channels]:
                raise ValueError(f"{path}: image mode {image.mode} does not match, {expected}")
            image = image.convert("L" if channels == 1 else "RGB")
            pixels = np.asarray(image, dtype=np.float32) / 255.0
    except OSError as e:
        raise ValueError(f"{path}: cannot read image: {e}")
    if pixels.shape[:2] != (size, size):
        raise ValueError(f"{path}: image is {pixels.shape[1]}x{pixels.shape[0]}, "
                         f"{expected}")
    if channels == 1:
        return pixels[None]
    return np.ascontiguousarray(np.transpose(pixels, (2, 0, 1)))


def save_gif(frames: Sequence[np.ndarray], path: PathLike, frame_ms: int = 150) -> None:
    """Animated, looping GIF; Pillow merges consecutive identical frames."""
    images = [frame_to_image(frame) for frame in frames]
    images[0].save(path, format="GIF", save_all=True, append_images=images[1:],
                   duration=frame_ms, loop=0)


def save_frame_strip(frames: Sequence[np.ndarray], out_dir: PathLike, prefix: str) -> List[Path]:
    """Write ``{prefix}_f{t}.png`` for every frame."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for t, frame in enumerate(frames):
        path = out_dir / f"{prefix}_f{t}.png"
        save_png(frame, path)
        paths.append(path)
    return paths


def export_clip(frames: Sequence[np.ndarray], out_dir: PathLike, clip_index: int) -> List[Path]:
    return save_frame_strip(frames, out_dir, f"clip{clip_index:06}")


def sample_grid(clips: Sequence[np.ndarray]) -> np.ndarray:
    """Tile clips ``[T, C, H, W]`` into one ``[C, rows*H, T*W]`` frame (rows = clips)."""
    if not clips:
        raise ValueError("sample grid needs at least one clip")
    rows = [np.concatenate(list(clip), axis=2) for clip in clips]
    return np.concatenate(rows, axis=1)


def save_sample_grid(clips: Sequence[np.ndarray], path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_png(sample_grid(clips), path)
    logger.debug(f"Wrote sample grid {path}")
