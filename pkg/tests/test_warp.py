"""
Tests for affine sampling grids, bilinear sampling and masked merging
"""

import os
import sys

import numpy as np
import pytest

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from inbetween.merge import masks_normalized, merge_masked
from inbetween.tensor import ShapeError, Tensor, backward, mul, reduce_sum, softmax_channels
from inbetween.warp import (
    AffineTransform,
    affine_grid,
    bilinear_sample,
    canonical_grid,
    warp_image,
)


class TestAffineGrid:
    """Grid generation."""

    def test_identity_grid_is_canonical(self):
        grid = affine_grid(AffineTransform.identity(), 4, 5)
        assert grid.shape == (4, 5, 2)
        assert grid.dtype == np.float64
        np.testing.assert_allclose(grid.data.reshape(-1, 2), canonical_grid(4, 5)[:, :2])

    def test_corners_span_unit_square(self):
        grid = affine_grid(AffineTransform.identity(), 3, 3).data
        np.testing.assert_allclose(grid[0, 0], [-1.0, -1.0])
        np.testing.assert_allclose(grid[2, 2], [1.0, 1.0])

    def test_batched_transforms(self):
        theta = Tensor(np.tile(AffineTransform.identity().params, (3, 1, 1)))
        assert affine_grid(theta, 6, 6).shape == (3, 6, 6, 2)

    def test_degenerate_extent_rejected(self):
        with pytest.raises(ShapeError):
            affine_grid(AffineTransform.identity(), 1, 5)

    def test_bad_transform_shape_rejected(self):
        with pytest.raises(ShapeError):
            affine_grid(Tensor(np.zeros((2, 2, 2))), 4, 4)

    def test_non_finite_transform_rejected(self):
        with pytest.raises(ValueError):
            AffineTransform(np.array([[1.0, 0.0, np.nan], [0.0, 1.0, 0.0]]))

    def test_is_identity(self):
        assert AffineTransform.identity().is_identity()
        assert not AffineTransform.translation(0.1, 0.0).is_identity()


class TestBilinearSample:
    """Tent-kernel sampling."""

    def setup_method(self):
        self.rng = np.random.default_rng(0)
        self.image = Tensor(self.rng.uniform(size=(3, 8, 8)))

    def test_identity_reproduces_image(self):
        out = warp_image(self.image, AffineTransform.identity())
        np.testing.assert_allclose(out.data, self.image.data, atol=1e-6)

    def test_integer_translation_shifts_content(self):
        t = AffineTransform.pixel_translation(2, 1, 8, 8)
        out = warp_image(self.image, t).data
        np.testing.assert_allclose(out[:, :7, :6], self.image.data[:, 1:, 2:], atol=1e-6)
        np.testing.assert_allclose(out[:, 7, :], 0.0, atol=1e-6)
        np.testing.assert_allclose(out[:, :, 6:], 0.0, atol=1e-6)

    def test_positive_translation_moves_content_left(self):
        image = np.zeros((1, 8, 8))
        image[0, 4, 4] = 1.0
        out = warp_image(Tensor(image), AffineTransform.pixel_translation(1, 0, 8, 8)).data
        assert np.unravel_index(np.argmax(out[0]), (8, 8)) == (4, 3)

    def test_weights_partition_unity(self):
        ones = Tensor(np.ones((1, 8, 8)))
        coords = self.rng.uniform(-1.0, 1.0, size=(5, 5, 2))
        out = bilinear_sample(ones, Tensor(coords, dtype=np.float64))
        np.testing.assert_allclose(out.data, 1.0, atol=1e-6)

    def test_far_out_of_range_reads_zero(self):
        grid = Tensor(np.full((2, 2, 2), 5.0), dtype=np.float64)
        out = bilinear_sample(self.image, grid)
        assert np.all(out.data == 0)

    def test_batch_mismatch_rejected(self):
        image = Tensor(np.zeros((2, 1, 4, 4)))
        grid = Tensor(np.zeros((3, 4, 4, 2)))
        with pytest.raises(ShapeError):
            bilinear_sample(image, grid)

    def test_image_gradient_conserves_mass_under_identity(self):
        image = Tensor(self.image.data, requires_grad=True)
        backward(reduce_sum(warp_image(image, AffineTransform.identity())))
        np.testing.assert_allclose(image.grad, 1.0, atol=1e-6)

    def test_translations_compose_on_interior(self):
        once = warp_image(self.image, AffineTransform.pixel_translation(3, 1, 8, 8)).data
        first = warp_image(self.image, AffineTransform.pixel_translation(1, 0, 8, 8))
        twice = warp_image(first, AffineTransform.pixel_translation(2, 1, 8, 8)).data
        np.testing.assert_allclose(twice[:, :7, :5], once[:, :7, :5], atol=1e-6)

    def test_one_row_image_interpolates_along_x(self):
        image = Tensor(np.array([[[0.0, 4.0]]]), dtype=np.float64)
        # pixel x = 0.25 on a 2-wide plane is -0.5 normalized
        grid = Tensor(np.array([[[-0.5, 0.0]]]), dtype=np.float64)
        out = bilinear_sample(image, grid)
        assert out.shape == (1, 1, 1)
        assert out.data[0, 0, 0] == pytest.approx(1.0)

    def test_bounded_inputs_stay_finite(self):
        image = Tensor(self.rng.uniform(-10.0, 10.0, size=(2, 3, 8, 8)), requires_grad=True)
        theta = Tensor(self.rng.uniform(-10.0, 10.0, size=(2, 2, 3)), requires_grad=True)
        out = warp_image(image, theta)
        assert np.all(np.isfinite(out.data))
        backward(reduce_sum(out))
        assert np.all(np.isfinite(image.grad))
        assert np.all(np.isfinite(theta.grad))

    def test_transform_gradient_follows_ramp(self):
        ramp = np.tile(np.arange(8, dtype=np.float64), (1, 8, 1))
        theta = Tensor(AffineTransform.translation(0.05, 0.0).params, requires_grad=True,
                       dtype=np.float64)
        out = bilinear_sample(Tensor(ramp, dtype=np.float64), affine_grid(theta, 8, 8))
        pick = np.zeros((1, 8, 8))
        pick[0, 3, 3] = 1.0
        backward(reduce_sum(mul(out, Tensor(pick, dtype=np.float64))))
        # one normalized unit is 3.5 pixels on an 8-wide plane
        assert theta.grad[0, 2] == pytest.approx(3.5)
        assert theta.grad[1, 2] == pytest.approx(0.0)


class TestMergeMasked:
    """Masked compositing."""

    def setup_method(self):
        rng = np.random.default_rng(5)
        self.images = [Tensor(rng.uniform(size=(1, 3, 4, 4))) for _ in range(3)]
        self.masks = softmax_channels(Tensor(rng.normal(size=(1, 3, 4, 4))))

    def test_identical_images_merge_to_themselves(self):
        merged = merge_masked([self.images[0]] * 3, self.masks)
        np.testing.assert_allclose(merged.data, self.images[0].data, atol=1e-6)

    def test_one_hot_mask_selects_image(self):
        masks = np.zeros((1, 3, 4, 4))
        masks[:, 1] = 1.0
        merged = merge_masked(self.images, Tensor(masks))
        np.testing.assert_allclose(merged.data, self.images[1].data)

    def test_output_is_convex_combination(self):
        merged = merge_masked(self.images, self.masks).data
        stack = np.stack([i.data for i in self.images])
        assert np.all(merged >= stack.min(axis=0) - 1e-6)
        assert np.all(merged <= stack.max(axis=0) + 1e-6)

    def test_matches_per_pixel_loop(self):
        merged = merge_masked(self.images, self.masks).data
        masks = self.masks.data
        expected = np.zeros_like(merged)
        for c in range(3):
            for y in range(4):
                for x in range(4):
                    for p in range(3):
                        expected[0, c, y, x] += masks[0, p, y, x] * self.images[p].data[0, c, y, x]
        np.testing.assert_allclose(merged, expected, atol=1e-6)

    def test_permuting_images_and_masks_together(self):
        order = [2, 0, 1]
        merged = merge_masked(self.images, self.masks).data
        permuted = merge_masked([self.images[p] for p in order], Tensor(self.masks.data[:, order]))
        np.testing.assert_allclose(permuted.data, merged, atol=1e-6)

    def test_bounded_inputs_stay_finite(self):
        rng = np.random.default_rng(9)
        images = [Tensor(rng.uniform(-10.0, 10.0, size=(1, 3, 4, 4)), requires_grad=True) for _ in range(3)]
        masks = Tensor(rng.uniform(-10.0, 10.0, size=(1, 3, 4, 4)), requires_grad=True)
        out = merge_masked(images, softmax_channels(masks))
        assert np.all(np.isfinite(out.data))
        backward(reduce_sum(out))
        assert all(np.all(np.isfinite(t.grad)) for t in images + [masks])

    def test_count_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            merge_masked(self.images[:2], self.masks)

    def test_channel_mismatch_rejected(self):
        odd = Tensor(np.zeros((1, 1, 4, 4)))
        with pytest.raises(ShapeError):
            merge_masked([self.images[0], self.images[1], odd], self.masks)

    def test_unbatched_merge(self):
        images = [Tensor(i.data[0]) for i in self.images]
        merged = merge_masked(images, Tensor(self.masks.data[0]))
        assert merged.shape == (3, 4, 4)

    def test_masks_normalized(self):
        assert masks_normalized(self.masks)
        assert not masks_normalized(Tensor(np.full((1, 3, 4, 4), 0.5)))

    def test_mask_gradient_is_channel_sum(self):
        masks = Tensor(self.masks.data, requires_grad=True)
        backward(reduce_sum(merge_masked(self.images, masks)))
        expected = np.stack([i.data.sum(axis=1) for i in self.images], axis=1)
        np.testing.assert_allclose(masks.grad, expected, rtol=1e-5)
