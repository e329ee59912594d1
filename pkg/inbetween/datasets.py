"""
Synthetic Video Datasets

Clips are generated on demand and are a pure function of
``(dataset, master seed, clip index)``: every clip draws from its own
``numpy.random.default_rng([seed, index, dataset id])``. Batches can therefore
be built in any order, in parallel, or from the middle of an epoch with
identical results.

Moving MNIST
    Two MNIST digits inside a 64×64 frame with random start position, speed
    and direction, reflecting off the walls; sub-pixel positions are blitted
    bilinearly and the digits are combined by per-pixel maximum.

2D Shapes
    One coloured circle, square or triangle moving with an integer velocity:
    circles vertically, squares horizontally, triangles diagonally. The start
    position is drawn from the range that keeps the whole path in the frame.
"""

import colorsys
import gzip
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import SHAPE_KINDS, TrainConfig
from .logging_config import get_logger
from .model import VideoClip
from .reports import OracleSummary


IDX_IMAGES_MAGIC = 2051
DIGIT_SIZE = 28
MNIST_FRAME_SIZE = 64
DIGITS_PER_CLIP = 2
DIGIT_SPEED_RANGE = (2.0, 5.0)
SHAPE_SIZE_RANGE = (10, 18)
SHAPE_MAX_SPEED = 5

DATASET_SPLITS = {"moving-mnist": (64000, 320), "shapes2d": (20000, 500)}
DATASET_IDS = {"moving-mnist": 0, "shapes2d": 1}
SPLITS = ("train", "test")
TEST_INDEX_OFFSET = 1 << 30

logger = get_logger("datasets")


class IdxFormatError(ValueError):
    """Raised when an IDX image file is malformed."""


@dataclass
class DigitBank:
    """Grayscale digit images ``[K, 28, 28]`` in [0, 1]."""

    images: np.ndarray
    split: str = "train"

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float32)
        if images.ndim != 3 or images.shape[1:] != (DIGIT_SIZE, DIGIT_SIZE):
            raise ValueError(f"digit images must be [K, 28, 28], got {images.shape}")
        if images.shape[0] == 0:
            raise ValueError("digit bank is empty")
        if images.min() < 0.0 or images.max() > 1.0:
            raise ValueError("digit pixel values must lie in [0, 1]")
        self.images = images

    def __len__(self) -> int:
        return self.images.shape[0]


def load_mnist_idx(images_path: Union[str, Path]) -> DigitBank:
    """
    Parse an IDX image file (optionally gzip-compressed).

    Args:
        images_path: Path to e.g. ``train-images-idx3-ubyte`` or its ``.gz``

    Returns:
        DigitBank with byte values scaled to [0, 1]

    Raises:
        IdxFormatError: Wrong magic, unexpected geometry or truncated payload
    """
    path = Path(images_path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise IdxFormatError(f"{path}: cannot read IDX file: {e}")
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as e:
            raise IdxFormatError(f"{path}: corrupt gzip stream: {e}")

    if len(raw) < 16:
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise IdxFormatError(f"{path}: magic {magic}, expected {IDX_IMAGES_MAGIC} (an IDX image file)")
    if (rows, cols) != (DIGIT_SIZE, DIGIT_SIZE):
        raise IdxFormatError(f"{path}: images are {rows}x{cols}, expected 28x28")
    expected = count * rows * cols
    payload = raw[16:]
    if len(payload) < expected:
        raise IdxFormatError(f"{path}: truncated payload, {len(payload)} of {expected} bytes")

    images = np.frombuffer(payload, dtype=np.uint8, count=expected).reshape(count, rows, cols)
    logger.info(f"Loaded {count} digit images from {path}")
    return DigitBank(images.astype(np.float32) / 255.0)


@dataclass
class ObjectState:
    """Trajectory of one object: top-left ``(row, col)`` per frame and its appearance."""

    kind: str
    positions: np.ndarray
    velocity: Tuple[float, float]
    size: int
    color: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    digit_index: Optional[int] = None


@dataclass
class ClipSpec:
    dataset: str
    clip_index: int
    seed: int
    t_len: int
    image_size: int
    objects: List[ObjectState] = field(default_factory=list)


def reflect_step(position: float, velocity: float, low: float, high: float) -> Tuple[float, float]:
    """
    Advance one coordinate by one frame, mirroring overshoot at the walls.

    ``reflect_step(35, 3, 0, 36)`` returns ``(34, -3)``.
    """
    position += velocity
    while position < low or position > high:
        if position > high:
            position = 2 * high - position
        else:
            position = 2 * low - position
        velocity = -velocity
    return position, velocity


def _clip_rng(dataset: str, seed: int, clip_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, clip_index, DATASET_IDS[dataset]])


# ---------------------------------------------------------------------------
# Moving MNIST
# ---------------------------------------------------------------------------

def moving_mnist_spec(bank: DigitBank, master_seed: int, clip_index: int, t_len: int = 5) -> ClipSpec:
    rng = _clip_rng("moving-mnist", master_seed, clip_index)
    limit = float(MNIST_FRAME_SIZE - DIGIT_SIZE)
    spec = ClipSpec("moving-mnist", clip_index, master_seed, t_len, MNIST_FRAME_SIZE)
    for _ in range(DIGITS_PER_CLIP):
        digit_index = int(rng.integers(len(bank)))
        start = rng.uniform(0.0, limit, size=2)
        speed = rng.uniform(*DIGIT_SPEED_RANGE)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        velocity = [speed * math.sin(angle), speed * math.cos(angle)]
        positions = [start.copy()]
        position = start.copy()
        for _ in range(t_len - 1):
            for axis in range(2):
                position[axis], velocity[axis] = reflect_step(position[axis], velocity[axis], 0.0, limit)
            positions.append(position.copy())
        spec.objects.append(ObjectState(
            kind="digit",
            positions=np.array(positions),
            velocity=(speed * math.sin(angle), speed * math.cos(angle)),
            size=DIGIT_SIZE,
            digit_index=digit_index,
        ))
    return spec


def blit_bilinear(canvas_size: int, patch: np.ndarray, top: float, left: float) -> np.ndarray:
    """
    Place ``patch`` with its top-left corner at a sub-pixel position.

    The patch is split over the four surrounding integer offsets with
    bilinear weights, so its mass is preserved while it fits in the canvas.
    """
    row, col = int(math.floor(top)), int(math.floor(left))
    frac_row, frac_col = top - row, left - col
    height, width = patch.shape
    canvas = np.zeros((canvas_size + 1, canvas_size + 1), dtype=np.float64)
    for d_row, w_row in ((0, 1.0 - frac_row), (1, frac_row)):
        for d_col, w_col in ((0, 1.0 - frac_col), (1, frac_col)):
            weight = w_row * w_col
            if weight == 0.0:
                continue
            canvas[row + d_row:row + d_row + height, col + d_col:col + d_col + width] += weight * patch
    return canvas[:canvas_size, :canvas_size]


def render_digit_frames(bank: DigitBank, obj: ObjectState, image_size: int = MNIST_FRAME_SIZE) -> np.ndarray:
    """Frames ``[T, H, W]`` of a single digit before compositing."""
    patch = bank.images[obj.digit_index].astype(np.float64)
    return np.stack([blit_bilinear(image_size, patch, top, left) for top, left in obj.positions])


def render_moving_mnist(bank: DigitBank, spec: ClipSpec) -> VideoClip:
    layers = [render_digit_frames(bank, obj, spec.image_size) for obj in spec.objects]
    frames = np.maximum.reduce(layers)
    return VideoClip(frames[:, None].astype(np.float32))


def sample_moving_mnist_clip(bank: DigitBank, master_seed: int, clip_index: int, t_len: int = 5) -> VideoClip:
    """Moving MNIST clip ``[T, 1, 64, 64]``; identical for identical arguments."""
    return render_moving_mnist(bank, moving_mnist_spec(bank, master_seed, clip_index, t_len))


# ---------------------------------------------------------------------------
# 2D Shapes
# ---------------------------------------------------------------------------

SHAPE_DIRECTIONS = {
    "circle": [(1, 0), (-1, 0)],
    "square": [(0, 1), (0, -1)],
    "triangle": [(1, 1), (1, -1), (-1, 1), (-1, -1)],
}


def shape_mask(kind: str, size: int) -> np.ndarray:
    """Binary ``size×size`` footprint; a pixel is set when its centre lies inside the shape."""
    centres = np.arange(size) + 0.5
    rows, cols = np.meshgrid(centres, centres, indexing="ij")
    half = size / 2.0
    if kind == "square":
        return np.ones((size, size), dtype=bool)
    if kind == "circle":
        return (rows - half) ** 2 + (cols - half) ** 2 <= half * half
    if kind == "triangle":
        # apex at the top centre, base along the bottom edge
        return np.abs(cols - half) <= rows / size * half
    raise ValueError(f"Unknown shape kind: {kind}")


def shapes_spec(master_seed: int, clip_index: int, t_len: int = 5, image_size: int = 64,
                shape_kinds: Sequence[str] = SHAPE_KINDS) -> ClipSpec:
    rng = _clip_rng("shapes2d", master_seed, clip_index)
    kind = shape_kinds[int(rng.integers(len(shape_kinds)))]
    hue = rng.uniform(0.0, 1.0)
    color = colorsys.hsv_to_rgb(hue, 1.0, 1.0)
    low, high = SHAPE_SIZE_RANGE
    scale = image_size / 64.0
    size = int(rng.integers(max(2, round(low * scale)), max(2, round(high * scale)) + 1))
    # small frames cap the speed so the whole path still fits
    max_speed = min(SHAPE_MAX_SPEED, (image_size - size) // max(1, t_len - 1))
    speed = int(rng.integers(0, max_speed + 1))
    directions = SHAPE_DIRECTIONS[kind]
    d_row, d_col = directions[int(rng.integers(len(directions)))]
    velocity = (d_row * speed, d_col * speed)

    travel = t_len - 1
    start = []
    for v in velocity:
        lo = max(0, -v * travel)
        hi = min(image_size - size, image_size - size - v * travel)
        if hi < lo:
            raise ValueError(f"{image_size}px frame too small for a {size}px shape at speed {speed}")
        start.append(int(rng.integers(lo, hi + 1)))
    positions = np.array([[start[0] + t * velocity[0], start[1] + t * velocity[1]] for t in range(t_len)])

    spec = ClipSpec("shapes2d", clip_index, master_seed, t_len, image_size)
    spec.objects.append(ObjectState(kind, positions, velocity, size, tuple(color)))
    return spec


def render_shapes(spec: ClipSpec) -> VideoClip:
    frames = np.zeros((spec.t_len, 3, spec.image_size, spec.image_size), dtype=np.float32)
    for obj in spec.objects:
        footprint = shape_mask(obj.kind, obj.size)
        color = np.asarray(obj.color, dtype=np.float32)[:, None, None]
        for t, (top, left) in enumerate(obj.positions.astype(int)):
            region = frames[t, :, top:top + obj.size, left:left + obj.size]
            region[:] = np.where(footprint[None], color, region)
    return VideoClip(frames)


def sample_shapes_clip(master_seed: int, clip_index: int, t_len: int = 5, image_size: int = 64,
                       shape_kinds: Sequence[str] = SHAPE_KINDS) -> VideoClip:
    """2D Shapes clip ``[T, 3, S, S]``; identical for identical arguments."""
    return render_shapes(shapes_spec(master_seed, clip_index, t_len, image_size, shape_kinds))


# ---------------------------------------------------------------------------
# Physics oracles
# ---------------------------------------------------------------------------

def frame_centroid(frame: np.ndarray) -> Tuple[float, float]:
    """Intensity-weighted ``(row, col)`` centroid of a ``[C, H, W]`` frame (max over channels)."""
    weights = np.asarray(frame, dtype=np.float64).max(axis=0)
    total = weights.sum()
    if total <= 0:
        return (float("nan"), float("nan"))
    rows, cols = np.indices(weights.shape)
    return float((rows * weights).sum() / total), float((cols * weights).sum() / total)


def validate_shapes_clip(spec: ClipSpec, clip: VideoClip, tolerance: float = 0.5) -> List[str]:
    """Motion-axis and in-frame checks for a Shapes clip; returns violation messages."""
    label = f"clip {spec.clip_index:06}"
    kind = spec.objects[0].kind
    violations = []
    masses = [float((frame.max(axis=0) > 0).sum()) for frame in clip.frames]
    if len(set(masses)) != 1 or masses[0] == 0:
        violations.append(f"{label}: object area changes across frames {masses}")
    centroids = np.array([frame_centroid(frame) for frame in clip.frames])
    steps = np.diff(centroids, axis=0)
    if kind == "circle" and np.any(np.abs(centroids[:, 1] - centroids[0, 1]) > tolerance):
        violations.append(f"{label}: circle centroid column moves")
    elif kind == "square" and np.any(np.abs(centroids[:, 0] - centroids[0, 0]) > tolerance):
        violations.append(f"{label}: square centroid row moves")
    elif kind == "triangle" and np.any(np.abs(np.abs(steps[:, 0]) - np.abs(steps[:, 1])) > tolerance):
        violations.append(f"{label}: triangle does not move diagonally")
    return violations


def validate_moving_mnist_clip(bank: DigitBank, spec: ClipSpec, clip: VideoClip,
                               mass_tolerance: float = 0.01) -> List[str]:
    """Bounds and per-digit mass conservation for a Moving MNIST clip."""
    label = f"clip {spec.clip_index:06}"
    violations = []
    limit = spec.image_size - DIGIT_SIZE
    if clip.frames.min() < 0.0 or clip.frames.max() > 1.0:
        violations.append(f"{label}: pixel values outside [0, 1]")
    for number, obj in enumerate(spec.objects):
        if np.any(obj.positions < 0) or np.any(obj.positions > limit):
            violations.append(f"{label}: digit {number} leaves the valid region")
        source_mass = float(bank.images[obj.digit_index].sum())
        masses = render_digit_frames(bank, obj, spec.image_size).sum(axis=(1, 2))
        if source_mass > 0 and np.any(np.abs(masses - source_mass) > mass_tolerance * source_mass):
            violations.append(f"{label}: digit {number} mass not conserved")
    return violations


# ---------------------------------------------------------------------------
# Clip sources and batching
# ---------------------------------------------------------------------------

class ClipSource:
    """
    Random-access clip and batch provider for one dataset split.

    Train split indices are ``0 .. size-1``; test indices start at
    ``TEST_INDEX_OFFSET`` so the splits never overlap. Batch positions walk
    through per-epoch permutations seeded by ``(seed, epoch, split)``.
    """

    def __init__(self, dataset: str, master_seed: int, batch_size: int, split: str = "train",
                 bank: Optional[DigitBank] = None, t_len: int = 5, image_size: int = 64,
                 shape_kinds: Sequence[str] = SHAPE_KINDS, size: Optional[int] = None,
                 workers: int = 1):
        if dataset not in DATASET_SPLITS:
            raise ValueError(f"Unknown dataset: {dataset}")
        if split not in SPLITS:
            raise ValueError(f"Unknown split: {split}")
        if dataset == "moving-mnist" and bank is None:
            raise ValueError("moving-mnist needs MNIST digit images (--mnist-idx)")
        if batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {batch_size}")
        self.logger = get_logger("datasets")
        self.dataset = dataset
        self.master_seed = master_seed
        self.batch_size = batch_size
        self.split = split
        self.bank = bank
        self.t_len = t_len
        self.image_size = image_size
        self.shape_kinds = list(shape_kinds)
        train_size, test_size = DATASET_SPLITS[dataset]
        default_size = train_size if split == "train" else test_size
        self.size = size if size is not None else default_size
        if self.size < 1:
            raise ValueError(f"split size must be positive, got {self.size}")
        self.offset = 0 if split == "train" else TEST_INDEX_OFFSET
        self.workers = workers
        self._permutations: Dict[int, np.ndarray] = {}

    @classmethod
    def from_config(cls, config: TrainConfig, bank: Optional[DigitBank] = None,
                    split: str = "train") -> "ClipSource":
        return cls(
            config.dataset, config.seed, config.batch_size, split=split, bank=bank,
            t_len=config.t_len, image_size=config.image_size, shape_kinds=config.shape_kinds,
            size=config.train_clips if split == "train" else config.test_clips,
            workers=config.workers,
        )

    def indices(self) -> range:
        return range(self.offset, self.offset + self.size)

    def spec(self, clip_index: int) -> ClipSpec:
        if self.dataset == "moving-mnist":
            return moving_mnist_spec(self.bank, self.master_seed, clip_index, self.t_len)
        return shapes_spec(self.master_seed, clip_index, self.t_len, self.image_size, self.shape_kinds)

    def clip(self, clip_index: int) -> VideoClip:
        spec = self.spec(clip_index)
        if self.dataset == "moving-mnist":
            return render_moving_mnist(self.bank, spec)
        return render_shapes(spec)

    def clips(self, clip_indices: Sequence[int]) -> List[VideoClip]:
        """Generate clips in order; threads never change the result."""
        if self.workers > 1 and len(clip_indices) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(self.clip, clip_indices))
        return [self.clip(i) for i in clip_indices]

    def _permutation(self, epoch: int) -> np.ndarray:
        if epoch not in self._permutations:
            rng = np.random.default_rng([self.master_seed, epoch, SPLITS.index(self.split)])
            self._permutations = {epoch: rng.permutation(self.size)}
        return self._permutations[epoch]

    def clip_index(self, sample_position: int) -> int:
        """Clip index of the ``sample_position``-th sample drawn from this split."""
        epoch, within = divmod(sample_position, self.size)
        return self.offset + int(self._permutation(epoch)[within])

    def batch_at(self, position: int) -> np.ndarray:
        """Batch number ``position`` as ``[B, T, C, H, W]`` float32."""
        first = position * self.batch_size
        indices = [self.clip_index(first + k) for k in range(self.batch_size)]
        return np.stack([clip.frames for clip in self.clips(indices)])

    def batches(self, epochs: Optional[int] = None) -> Iterator[np.ndarray]:
        position = 0
        while epochs is None or position * self.batch_size < epochs * self.size:
            yield self.batch_at(position)
            position += 1

    def validate(self, clip_indices: Sequence[int]) -> OracleSummary:
        """Run the physics oracles over the given clips."""
        summary = OracleSummary(dataset=self.dataset)
        for clip_index in clip_indices:
            spec = self.spec(clip_index)
            if self.dataset == "moving-mnist":
                clip = render_moving_mnist(self.bank, spec)
                summary.violations.extend(validate_moving_mnist_clip(self.bank, spec, clip))
            else:
                clip = render_shapes(spec)
                summary.violations.extend(validate_shapes_clip(spec, clip))
            summary.clips_checked += 1
        self.logger.info(f"Validated {summary.clips_checked} {self.dataset} clips, "
                         f"{len(summary.violations)} violations")
        return summary


def batch_iterator(dataset: str, bank: Optional[DigitBank], master_seed: int, batch_size: int,
                   split: str = "train", epochs: Optional[int] = None, **options) -> Iterator[np.ndarray]:
    """
    Stream batches ``[B, T, C, H, W]`` of one split.

    The train split cycles forever unless ``epochs`` is given; the test split
    defaults to a single pass. The last batch of a pass may wrap into the next
    epoch's order.
    """
    source = ClipSource(dataset, master_seed, batch_size, split=split, bank=bank, **options)
    if epochs is None and split == "test":
        epochs = 1
    return source.batches(epochs)
