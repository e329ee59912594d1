"""
Masked compositing of transformed images.

P warped copies of the start frame are blended into one frame by per-pixel
weights. Masks arrive softmax-normalized over the P axis, so every output
pixel is a convex combination of the P candidates at that pixel.
"""

from typing import Sequence

import numpy as np

from .tensor import ShapeError, Tensor, reshape


def masks_normalized(masks: Tensor, tolerance: float = 1e-6) -> bool:
    """True when masks lie in [0, 1] and sum to 1 over the P axis at every pixel."""
    data = masks.data if masks.ndim == 4 else masks.data[None]
    total = data.sum(axis=1)
    return bool(np.all(data >= 0) and np.all(data <= 1 + tolerance)
                and np.all(np.abs(total - 1.0) <= tolerance))


def merge_masked(transformed: Sequence[Tensor], masks: Tensor) -> Tensor:
    """
    Composite P transformed images through a mask stack.

    ``output[n, c, h, w] = sum_p masks[n, p, h, w] * transformed[p][n, c, h, w]``

    Args:
        transformed: P images, each ``[N, C, H, W]`` (or ``[C, H, W]``)
        masks: Mask stack ``[N, P, H, W]`` (or ``[P, H, W]``)

    Returns:
        Merged frame with the shape of one transformed image
    """
    count = len(transformed)
    if count < 1:
        raise ShapeError("merge_masked needs at least one transformed image")
    unbatched = masks.ndim == 3
    if unbatched:
        masks = reshape(masks, (1,) + masks.shape)
        transformed = [reshape(t, (1,) + t.shape) for t in transformed]
    if masks.ndim != 4:
        raise ShapeError(f"merge_masked: masks must be [N, P, H, W], got {masks.shape}")
    n, p, h, w = masks.shape
    if p != count:
        raise ShapeError(f"merge_masked: {count} images but {p} masks")
    channels = transformed[0].shape[1] if transformed[0].ndim == 4 else None
    for index, image in enumerate(transformed):
        if image.ndim != 4 or image.shape[0] != n or image.shape[2:] != (h, w):
            raise ShapeError(
                f"merge_masked: image {index} has shape {image.shape}, plane must be {n}x?x{h}x{w}"
            )
        if image.shape[1] != channels:
            raise ShapeError(f"merge_masked: image {index} has {image.shape[1]} channels, expected {channels}")

    weights = masks.data
    out = np.zeros(transformed[0].shape, dtype=np.result_type(weights, transformed[0].data))
    for index, image in enumerate(transformed):
        out += weights[:, index:index + 1] * image.data

    def _backward(g):
        image_grads = [g * weights[:, index:index + 1] for index in range(count)]
        mask_grad = np.stack([(g * image.data).sum(axis=1) for image in transformed], axis=1)
        return tuple(image_grads) + (mask_grad,)

    result = Tensor._from_op(out, tuple(transformed) + (masks,), "merge_masked", _backward)
    if unbatched:
        result = reshape(result, result.shape[1:])
    return result
