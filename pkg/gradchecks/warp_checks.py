"""
Finite-difference checks for warping and merging.

The tent kernel has kinks wherever a sample lands on an integer pixel
coordinate, so checks that differentiate with respect to sample positions
draw their coordinates away from integers.
"""

import numpy as np

from inbetween.tensor import Tensor, gradient_check, softmax_channels
from inbetween.merge import merge_masked
from inbetween.warp import affine_grid, bilinear_sample, canonical_grid, warp_image

from .autodiff_checks import over_seeds, projected
from .registry import gradcheck


KINK_MARGIN = 0.02
MAX_DRAWS = 5000


def off_integer_pixels(rng: np.random.Generator, count: int, extent: int) -> np.ndarray:
    """Pixel coordinates in [-1, extent) whose fractional part lies in [0.1, 0.9]."""
    return rng.integers(-1, extent, size=count) + rng.uniform(0.1, 0.9, size=count)


def to_normalized(pixels: np.ndarray, extent: int) -> np.ndarray:
    return 2.0 * pixels / (extent - 1) - 1.0


def kink_free_transform(rng: np.random.Generator, height: int, width: int, spread: float = 0.1) -> np.ndarray:
    """A near-identity [1, 2, 3] transform whose samples all keep KINK_MARGIN px from integers."""
    base = canonical_grid(height, width)
    for _ in range(MAX_DRAWS):
        theta = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]) + spread * rng.standard_normal((2, 3))
        coords = base @ theta.T
        px = (coords[:, 0] + 1.0) * 0.5 * (width - 1)
        py = (coords[:, 1] + 1.0) * 0.5 * (height - 1)
        frac = np.concatenate([px - np.round(px), py - np.round(py)])
        if np.all(np.abs(frac) >= KINK_MARGIN):
            return theta[None]
    raise RuntimeError("no kink-free transform found")


@gradcheck("affine_grid", "sample grid w.r.t. all six transform parameters", category="warp")
def check_affine_grid() -> float:
    def case(rng: np.random.Generator) -> float:
        theta = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]) + 0.2 * rng.standard_normal((2, 2, 3))
        return gradient_check(lambda t: projected(affine_grid(t, 5, 6)), [theta])

    return over_seeds(21, case)


@gradcheck("bilinear_sample_image", "sampler w.r.t. the source image", category="warp")
def check_sampler_image() -> float:
    def case(rng: np.random.Generator) -> float:
        h, w = 5, 6
        grid = np.stack([to_normalized(off_integer_pixels(rng, 2 * 4 * 4, w), w),
                         to_normalized(off_integer_pixels(rng, 2 * 4 * 4, h), h)], axis=-1).reshape(2, 4, 4, 2)
        grid_tensor = Tensor(grid, dtype=np.float64)
        return gradient_check(lambda image: projected(bilinear_sample(image, grid_tensor)),
                              [rng.uniform(0.0, 1.0, size=(2, 3, h, w))])

    return over_seeds(22, case)


@gradcheck("bilinear_sample_grid", "sampler w.r.t. sample coordinates, borders included", category="warp")
def check_sampler_grid() -> float:
    def case(rng: np.random.Generator) -> float:
        h, w = 5, 6
        image = Tensor(rng.uniform(0.0, 1.0, size=(2, 3, h, w)), dtype=np.float64)
        grid = np.stack([to_normalized(off_integer_pixels(rng, 2 * 4 * 4, w), w),
                         to_normalized(off_integer_pixels(rng, 2 * 4 * 4, h), h)], axis=-1).reshape(2, 4, 4, 2)
        return gradient_check(lambda g: projected(bilinear_sample(image, g)), [grid])

    return over_seeds(23, case)


@gradcheck("warp_image", "backward warp w.r.t. transform and image, 2x4x5 and 1x8x8 frames", category="warp")
def check_warp_image() -> float:
    def case(rng: np.random.Generator) -> float:
        errors = []
        for channels, h, w in ((2, 4, 5), (1, 8, 8)):
            theta = kink_free_transform(rng, h, w)
            errors.append(gradient_check(lambda image, t: projected(warp_image(image, t)),
                                         [rng.uniform(0.0, 1.0, size=(1, channels, h, w)), theta]))
        return float(np.max(errors))

    return over_seeds(24, case)



@gradcheck("merge_masked", "masked merge w.r.t. every image and the masks", category="merge")
def check_merge() -> float:
    def case(rng: np.random.Generator) -> float:
        shape = (2, 3, 4, 4)
        return gradient_check(lambda a, b, c, m: projected(merge_masked([a, b, c], m)),
                              [rng.uniform(0.0, 1.0, size=shape) for _ in range(3)]
                              + [rng.uniform(0.0, 1.0, size=(2, 3, 4, 4))])

    return over_seeds(25, case)


@gradcheck("merge_softmax", "merge through softmax-normalized mask logits", category="merge")
def check_merge_softmax() -> float:
    def case(rng: np.random.Generator) -> float:
        shape = (2, 1, 4, 4)
        return gradient_check(lambda a, b, logits: projected(merge_masked([a, b], softmax_channels(logits))),
                              [rng.uniform(0.0, 1.0, size=shape), rng.uniform(0.0, 1.0, size=shape),
                               rng.standard_normal((2, 2, 4, 4))])

    return over_seeds(26, case)
