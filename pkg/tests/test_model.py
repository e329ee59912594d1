"""
Tests for the generator and critic networks
"""

import os
import sys

import numpy as np
import pytest

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from inbetween.config import TrainConfig
from inbetween.evaluation import count_parameters
from inbetween.merge import masks_normalized
from inbetween.model import (
    ModelParams,
    VideoClip,
    build_generator_input,
    criticize_clip,
    critic_output_bound,
    decode_masks,
    encode_scenario,
    generate_midpoint_frame,
    generate_transforms,
    identity_transforms_at_init,
    init_params,
    parameter_shapes,
    sample_latent,
)
from inbetween.tensor import ShapeError, Tensor
from inbetween.training import clip_weights


def small_config(**overrides) -> TrainConfig:
    values = dict(image_size=16, width_divisor=8, latent_dim=8, scenario_dim=16,
                  num_transforms=3, t_len=5, batch_size=2)
    values.update(overrides)
    return TrainConfig(**values)


def randomize_heads(params: ModelParams, seed: int = 1) -> None:
    """Give the transform head non-zero output weights so z and the frames matter."""
    rng = np.random.default_rng(seed)
    weight = params["transform.fc2.weight"]
    weight.data = (0.05 * rng.standard_normal(weight.shape)).astype(np.float32)


class TestParameters:
    """Parameter layout, initialization and counts."""

    def test_full_size_counts(self):
        counts = count_parameters(TrainConfig())
        assert counts["generator"] == 8_140_124
        assert counts["critic"] == 2_777_025

    def test_moving_mnist_counts(self):
        counts = count_parameters(TrainConfig(dataset="moving-mnist"))
        assert counts["generator"] == 8_138_076
        assert counts["critic"] == 2_766_785

    def test_canonical_names(self):
        shapes = parameter_shapes(TrainConfig())
        assert shapes["encoder.conv1.weight"] == (32, 6, 4, 4)
        assert shapes["transform.fc2.weight"] == (24, 256)
        assert shapes["mask.deconv3.weight"] == (32, 4, 4, 4)
        assert shapes["critic.conv1.weight"] == (64, 15, 4, 4)
        assert shapes["critic.fc.weight"] == (1, 512 * 4 * 4)

    def test_init_is_deterministic(self):
        config = small_config()
        assert init_params(3, config).checksum() == init_params(3, config).checksum()
        assert init_params(3, config).checksum() != init_params(4, config).checksum()

    def test_init_biases_zero_and_identity_head(self):
        params = init_params(0, small_config())
        assert np.all(params["encoder.conv1.bias"].data == 0)
        assert identity_transforms_at_init(params)

    def test_he_uniform_bound(self):
        params = init_params(0, small_config())
        weight = params["encoder.conv1.weight"].data
        fan_in = weight.shape[1] * 16
        assert np.abs(weight).max() <= np.sqrt(6.0 / fan_in)

    def test_groups_share_tensors(self):
        params = init_params(0, small_config())
        critic = params.critic()
        assert all(name.startswith("critic.") for name in critic)
        assert critic["critic.fc.weight"] is params["critic.fc.weight"]
        assert len(params.generator()) + len(critic) == len(params)

    def test_from_arrays_round_trip(self):
        params = init_params(0, small_config())
        rebuilt = ModelParams.from_arrays(params.arrays(), params.config)
        assert rebuilt.checksum() == params.checksum()


class TestGeneratorInput:
    """Input assembly."""

    def test_rgb_input_has_six_channels(self):
        frame = np.zeros((3, 16, 16))
        inputs = build_generator_input(frame, frame, np.zeros(8))
        assert inputs.encoder_input().shape == (1, 6, 16, 16)

    def test_grayscale_input_has_two_channels(self):
        frame = np.zeros((1, 64, 64))
        inputs = build_generator_input(frame, frame, np.zeros(8))
        assert inputs.encoder_input().shape == (1, 2, 64, 64)

    def test_equal_frames_give_zero_difference(self):
        frame = np.random.default_rng(0).uniform(size=(3, 16, 16))
        inputs = build_generator_input(frame, frame, np.zeros(8))
        assert np.all(inputs.difference.data == 0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            build_generator_input(np.zeros((3, 16, 16)), np.zeros((3, 32, 32)), np.zeros(8))

    def test_out_of_range_frame_rejected(self):
        with pytest.raises(ValueError):
            build_generator_input(np.full((3, 16, 16), 2.0), np.zeros((3, 16, 16)), np.zeros(8))


class TestGenerator:
    """Scenario encoder, heads and the midpoint pass."""

    def setup_method(self):
        self.config = small_config()
        self.params = init_params(0, self.config)
        self.rng = np.random.default_rng(7)

    def frames(self, batch: int = 2):
        return (self.rng.uniform(size=(batch, 3, 16, 16)).astype(np.float32),
                self.rng.uniform(size=(batch, 3, 16, 16)).astype(np.float32))

    def test_zero_input_gives_zero_code(self):
        zero = np.zeros((1, 3, 16, 16))
        code = encode_scenario(self.params, build_generator_input(zero, zero, np.zeros((1, 8))))
        assert code.code.shape == (1, 16)
        assert np.all(code.code.data == 0)

    def test_different_inputs_give_different_codes(self):
        a, b = self.frames(1)
        z = np.zeros((1, 8))
        code_ab = encode_scenario(self.params, build_generator_input(a, b, z)).code.data
        code_ba = encode_scenario(self.params, build_generator_input(b, a, z)).code.data
        assert not np.allclose(code_ab, code_ba)

    def test_wrong_frame_size_rejected(self):
        frame = np.zeros((1, 3, 32, 32))
        with pytest.raises(ShapeError):
            encode_scenario(self.params, build_generator_input(frame, frame, np.zeros((1, 8))))

    def test_transforms_start_at_identity(self):
        a, b = self.frames()
        inputs = build_generator_input(a, b, sample_latent(self.rng, 2, 8))
        code = encode_scenario(self.params, inputs)
        transforms = generate_transforms(self.params, code, inputs.latent)
        assert len(transforms) == 3
        for t in transforms:
            assert t.shape == (2, 2, 3)
            np.testing.assert_array_equal(t.data, np.tile([[1, 0, 0], [0, 1, 0]], (2, 1, 1)))

    def test_transforms_depend_on_latent(self):
        randomize_heads(self.params)
        a, b = self.frames(1)
        inputs = build_generator_input(a, b, np.zeros((1, 8)))
        code = encode_scenario(self.params, inputs)
        t0 = generate_transforms(self.params, code, Tensor(np.zeros((1, 8))))[0].data
        t1 = generate_transforms(self.params, code, Tensor(np.ones((1, 8))))[0].data
        assert not np.allclose(t0, t1)

    def test_masks_are_normalized(self):
        a, b = self.frames()
        inputs = build_generator_input(a, b, sample_latent(self.rng, 2, 8))
        masks = decode_masks(self.params, encode_scenario(self.params, inputs), inputs.latent)
        assert masks.shape == (2, 3, 16, 16)
        assert masks_normalized(masks)

    def test_zeroed_decoder_gives_uniform_masks(self):
        self.params["mask.deconv3.weight"].data[:] = 0
        a, b = self.frames(1)
        inputs = build_generator_input(a, b, np.zeros((1, 8)))
        masks = decode_masks(self.params, encode_scenario(self.params, inputs), inputs.latent)
        np.testing.assert_allclose(masks.data, 1.0 / 3.0, atol=1e-6)

    def test_identity_at_init_reproduces_start_frame(self):
        start, end = self.frames(100)
        z = sample_latent(self.rng, 100, 8)
        out = generate_midpoint_frame(self.params, start, end, z)
        np.testing.assert_allclose(out.data, start, atol=1e-5)

    def test_unbatched_call(self):
        start, end = self.frames(1)
        out = generate_midpoint_frame(self.params, start[0], end[0], np.zeros(8))
        assert out.shape == (3, 16, 16)

    def test_blank_in_blank_out(self):
        randomize_heads(self.params)
        blank = np.zeros((2, 3, 16, 16))
        out = generate_midpoint_frame(self.params, blank, blank, sample_latent(self.rng, 2, 8))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-6)

    def test_output_in_unit_range(self):
        randomize_heads(self.params)
        start, end = self.frames()
        out = generate_midpoint_frame(self.params, start, end, sample_latent(self.rng, 2, 8)).data
        assert out.min() >= -1e-6 and out.max() <= 1.0 + 1e-6

    def test_latent_changes_output(self):
        randomize_heads(self.params)
        start, end = self.frames(1)
        out0 = generate_midpoint_frame(self.params, start, end, np.zeros((1, 8))).data
        out1 = generate_midpoint_frame(self.params, start, end, np.ones((1, 8))).data
        assert not np.allclose(out0, out1)

    def test_repeated_pass_is_bitwise_identical(self):
        randomize_heads(self.params)
        start, end = self.frames()
        z = sample_latent(self.rng, 2, 8)
        first = generate_midpoint_frame(self.params, start, end, z).data.copy()
        second = generate_midpoint_frame(self.params, start, end, z).data
        assert first.tobytes() == second.tobytes()

    def test_latent_batch_mismatch_rejected(self):
        start, end = self.frames(2)
        with pytest.raises(ShapeError):
            generate_midpoint_frame(self.params, start, end, np.zeros((3, 8)))


class TestCritic:
    """Clip scoring."""

    def setup_method(self):
        self.config = small_config()
        self.params = init_params(0, self.config)
        self.rng = np.random.default_rng(11)

    def test_scores_per_clip(self):
        clips = self.rng.uniform(size=(4, 5, 3, 16, 16))
        assert criticize_clip(self.params, clips).shape == (4,)

    def test_accepts_video_clip_and_frame_list(self):
        frames = self.rng.uniform(size=(5, 3, 16, 16)).astype(np.float32)
        from_clip = criticize_clip(self.params, VideoClip(frames)).data
        from_list = criticize_clip(self.params, [Tensor(f[None]) for f in frames]).data
        np.testing.assert_allclose(from_clip, from_list, rtol=1e-5)

    def test_wrong_frame_count_rejected(self):
        clips = self.rng.uniform(size=(1, 4, 3, 16, 16))
        with pytest.raises(ShapeError):
            criticize_clip(self.params, clips)

    def test_doubling_head_doubles_scores(self):
        clips = self.rng.uniform(size=(3, 5, 3, 16, 16))
        before = criticize_clip(self.params, clips).data.copy()
        self.params["critic.fc.weight"].data *= 2
        after = criticize_clip(self.params, clips).data
        np.testing.assert_allclose(after, 2 * before, rtol=1e-6)

    def test_clipped_critic_respects_bound(self):
        clip_weights(self.params, 0.01)
        bound = critic_output_bound(self.params)
        clips = self.rng.uniform(size=(8, 5, 3, 16, 16))
        scores = criticize_clip(self.params, clips).data
        assert np.all(np.abs(scores) <= bound)


class TestVideoClip:
    """Clip container."""

    def test_values_are_clamped(self):
        clip = VideoClip(np.full((3, 1, 4, 4), 1.5))
        assert clip.frames.max() == 1.0
        assert clip.length == 3
        assert clip.frame_shape == (1, 4, 4)

    def test_needs_four_dimensions(self):
        with pytest.raises(ShapeError):
            VideoClip(np.zeros((3, 4, 4)))
