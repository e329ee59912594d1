"""
Differentiable Affine Warping

A 2x3 affine matrix T maps every output pixel's normalized coordinate
(x_k, y_k, 1) to a source coordinate (x̂_k, ŷ_k); the source image is then
read there with the tent (bilinear) kernel max(0, 1 - |d|) evaluated in pixel
units. This is backward warping: T maps output positions to source positions,
so a positive x translation moves image content to the left.

Normalized coordinates span [-1, 1] corner to corner:
``x_k = 2*col/(W-1) - 1``. Sample coordinates are carried in float64 so the
identity transform reproduces pixel centres exactly; image values and
transform parameters keep their own precision.
"""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .tensor import ShapeError, Tensor, reshape


@dataclass
class AffineTransform:
    """Six parameters arranged as ``[[a, b, tx], [c, d, ty]]``."""

    params: np.ndarray = field(default_factory=lambda: np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64).reshape(2, 3)
        if not np.all(np.isfinite(self.params)):
            raise ValueError(f"AffineTransform parameters must be finite: {self.params.tolist()}")

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "AffineTransform":
        """Translation in normalized units (2/(W-1) per pixel horizontally)."""
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty]]))

    @classmethod
    def pixel_translation(cls, dx: float, dy: float, height: int, width: int) -> "AffineTransform":
        return cls.translation(2.0 * dx / (width - 1), 2.0 * dy / (height - 1))

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.params, AffineTransform.identity().params))

    def to_tensor(self, dtype=np.float32, requires_grad: bool = False) -> Tensor:
        return Tensor(self.params, requires_grad=requires_grad, dtype=dtype)


def canonical_grid(height: int, width: int) -> np.ndarray:
    """Homogeneous normalized coordinates ``(x, y, 1)`` of every pixel, shape ``[H*W, 3]``."""
    xs = 2.0 * np.arange(width, dtype=np.float64) / (width - 1) - 1.0
    ys = 2.0 * np.arange(height, dtype=np.float64) / (height - 1) - 1.0
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel(), np.ones(height * width)], axis=1)


def affine_grid(t: Union[AffineTransform, Tensor], height: int, width: int) -> Tensor:
    """
    Source coordinates for every output pixel under transform(s) ``t``.

    Args:
        t: An AffineTransform, a ``[2, 3]`` tensor or a batch ``[N, 2, 3]``
        height: Output plane height (>= 2)
        width: Output plane width (>= 2)

    Returns:
        Sample grid ``[N, H, W, 2]`` (``[H, W, 2]`` for a single transform)
        holding ``(x̂_k, ŷ_k)`` in normalized units
    """
    if height < 2 or width < 2:
        raise ShapeError(f"affine_grid: extents must be at least 2, got {height}x{width}")
    theta = t.to_tensor() if isinstance(t, AffineTransform) else t
    unbatched = theta.ndim == 2
    if unbatched:
        theta = reshape(theta, (1,) + theta.shape)
    if theta.ndim != 3 or theta.shape[1:] != (2, 3):
        raise ShapeError(f"affine_grid: transforms must be [N, 2, 3], got {theta.shape}")

    n = theta.shape[0]
    base = canonical_grid(height, width)
    coords = np.matmul(base[None], np.transpose(theta.data.astype(np.float64), (0, 2, 1)))

    def _backward(g):
        gm = g.reshape(n, height * width, 2)
        return (np.matmul(np.transpose(gm, (0, 2, 1)), base),)

    grid = Tensor._from_op(coords.reshape(n, height, width, 2), (theta,), "affine_grid", _backward)
    if unbatched:
        grid = reshape(grid, (height, width, 2))
    return grid


def bilinear_sample(image: Tensor, grid: Tensor) -> Tensor:
    """
    Read ``image`` at the grid's source coordinates with the tent kernel.

    Samples whose four neighbours all fall outside the image read zero.

    Args:
        image: Source ``[N, C, H, W]`` (or ``[C, H, W]``)
        grid: Sample grid ``[N, Ho, Wo, 2]`` (or ``[Ho, Wo, 2]``)

    Returns:
        Sampled image ``[N, C, Ho, Wo]`` (or ``[C, Ho, Wo]``)
    """
    unbatched = image.ndim == 3
    if unbatched:
        if grid.ndim != 3:
            raise ShapeError(f"bilinear_sample: unbatched image needs an [H, W, 2] grid, got {grid.shape}")
        image = reshape(image, (1,) + image.shape)
        grid = reshape(grid, (1,) + grid.shape)
    if image.ndim != 4:
        raise ShapeError(f"bilinear_sample: image must be [N, C, H, W], got {image.shape}")
    if grid.ndim != 4 or grid.shape[3] != 2 or grid.shape[0] != image.shape[0]:
        raise ShapeError(
            f"bilinear_sample: grid {grid.shape} does not match image batch {image.shape[0]}"
        )

    n, c, hi, wi = image.shape
    ho, wo = grid.shape[1:3]
    count = ho * wo
    coords = grid.data.astype(np.float64)
    xp = ((coords[..., 0] + 1.0) * 0.5 * (wi - 1)).reshape(n, 1, count)
    yp = ((coords[..., 1] + 1.0) * 0.5 * (hi - 1)).reshape(n, 1, count)
    x0 = np.floor(xp)
    y0 = np.floor(yp)
    flat_image = image.data.reshape(n, c, hi * wi)

    out = np.zeros((n, c, count), dtype=np.float64)
    corners = []
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yj = y0 + dy
            ddx = xp - xi
            ddy = yp - yj
            wx = np.maximum(0.0, 1.0 - np.abs(ddx))
            wy = np.maximum(0.0, 1.0 - np.abs(ddy))
            valid = (xi >= 0) & (xi <= wi - 1) & (yj >= 0) & (yj <= hi - 1)
            index = (np.clip(yj, 0, hi - 1) * wi + np.clip(xi, 0, wi - 1)).astype(np.int64)
            values = np.take_along_axis(flat_image, np.broadcast_to(index, (n, c, count)), axis=2)
            weight = wx * wy * valid
            out += weight * values
            corners.append((index, ddx, ddy, wx, wy, valid, values, weight))

    def _backward(g):
        gm = g.reshape(n, c, count).astype(np.float64)
        offsets = ((np.arange(n)[:, None, None] * c + np.arange(c)[None, :, None]) * (hi * wi))
        g_image = np.zeros(n * c * hi * wi, dtype=np.float64)
        g_x = np.zeros((n, 1, count), dtype=np.float64)
        g_y = np.zeros((n, 1, count), dtype=np.float64)
        for index, ddx, ddy, wx, wy, valid, values, weight in corners:
            flat_index = (offsets + index).ravel()
            g_image += np.bincount(flat_index, weights=(gm * weight).ravel(), minlength=g_image.size)
            # Tent slopes; the kinks at |d| = 0 and |d| = 1 take subgradient 0
            slope_x = -np.sign(ddx) * (np.abs(ddx) < 1.0)
            slope_y = -np.sign(ddy) * (np.abs(ddy) < 1.0)
            weighted = (gm * values).sum(axis=1, keepdims=True) * valid
            g_x += weighted * slope_x * wy
            g_y += weighted * slope_y * wx
        g_grid = np.stack([
            (g_x * 0.5 * (wi - 1)).reshape(n, ho, wo),
            (g_y * 0.5 * (hi - 1)).reshape(n, ho, wo),
        ], axis=-1)
        return g_image.reshape(image.shape), g_grid

    result = Tensor._from_op(
        out.reshape(n, c, ho, wo).astype(image.dtype), (image, grid), "bilinear_sample", _backward
    )
    if unbatched:
        result = reshape(result, (c, ho, wo))
    return result


def warp_image(image: Tensor, t: Union[AffineTransform, Tensor],
               height: Optional[int] = None, width: Optional[int] = None) -> Tensor:
    """
    Backward-warp an image by affine transform(s).

    Args:
        image: ``[C, H, W]`` or ``[N, C, H, W]``
        t: AffineTransform, ``[2, 3]`` tensor or ``[N, 2, 3]`` batch
        height: Output height (defaults to the image height)
        width: Output width (defaults to the image width)
    """
    height = height or image.shape[-2]
    width = width or image.shape[-1]
    return bilinear_sample(image, affine_grid(t, height, width))
