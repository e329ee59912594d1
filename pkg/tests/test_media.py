"""
Tests for PNG, GIF and sample-grid export
"""

import os
import sys

import numpy as np
import pytest
from PIL import Image

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from inbetween.media import (
    export_clip,
    load_png,
    sample_grid,
    save_gif,
    save_png,
    save_sample_grid,
    to_uint8,
)
from inbetween.tensor import ShapeError


class TestConversion:
    """Float frames to 8-bit pixels."""

    def test_grayscale_drops_channel_axis(self):
        pixels = to_uint8(np.ones((1, 4, 5)))
        assert pixels.shape == (4, 5)
        assert pixels.dtype == np.uint8
        assert np.all(pixels == 255)

    def test_rgb_moves_channels_last(self):
        frame = np.zeros((3, 2, 2))
        frame[1] = 0.5
        pixels = to_uint8(frame)
        assert pixels.shape == (2, 2, 3)
        assert np.all(pixels[..., 1] == 128)

    def test_out_of_range_values_are_clamped(self):
        assert to_uint8(np.full((1, 1, 1), 3.0))[0, 0] == 255
        assert to_uint8(np.full((1, 1, 1), -1.0))[0, 0] == 0

    def test_bad_channel_count(self):
        with pytest.raises(ShapeError):
            to_uint8(np.zeros((2, 4, 4)))


class TestFiles:
    """PNG and GIF files."""

    def test_png_round_trip_within_quantization(self, tmp_path):
        frame = np.random.default_rng(0).uniform(size=(3, 8, 8))
        save_png(frame, tmp_path / "f.png")
        loaded = load_png(tmp_path / "f.png", 3, 8)
        assert loaded.shape == (3, 8, 8)
        assert np.abs(loaded - frame).max() <= 0.5 / 255 + 1e-6

    def test_load_rejects_channel_mismatch(self, tmp_path):
        save_png(np.full((3, 8, 8), 0.5), tmp_path / "rgb.png")
        save_png(np.full((1, 8, 8), 0.5), tmp_path / "gray.png")
        with pytest.raises(ValueError, match=r"expected 8x8 with 1 channel"):
            load_png(tmp_path / "rgb.png", 1, 8)
        with pytest.raises(ValueError, match=r"expected 8x8 with 3 channel"):
            load_png(tmp_path / "gray.png", 3, 8)

    def test_load_accepts_rgba_for_color(self, tmp_path):
        pixels = np.zeros((8, 8, 4), dtype=np.uint8)
        pixels[..., 0] = 255
        pixels[..., 3] = 255
        Image.fromarray(pixels).save(tmp_path / "rgba.png")
        frame = load_png(tmp_path / "rgba.png", 3, 8)
        assert frame.shape == (3, 8, 8)
        assert np.all(frame[0] == 1.0)
        assert np.all(frame[1:] == 0.0)

    def test_load_rejects_wrong_size(self, tmp_path):
        save_png(np.zeros((1, 8, 8)), tmp_path / "small.png")
        with pytest.raises(ValueError, match="expected 16x16"):
            load_png(tmp_path / "small.png", 1, 16)

    def test_load_rejects_non_image(self, tmp_path):
        path = tmp_path / "notes.png"
        path.write_text("not an image")
        with pytest.raises(ValueError):
            load_png(path, 3, 8)

    def test_gif_is_animated(self, tmp_path):
        frames = [np.full((1, 8, 8), t / 4.0) for t in range(5)]
        save_gif(frames, tmp_path / "clip.gif", frame_ms=100)
        with Image.open(tmp_path / "clip.gif") as image:
            assert image.format == "GIF"
            assert getattr(image, "is_animated", False)

    def test_export_clip_names(self, tmp_path):
        paths = export_clip(np.zeros((5, 3, 8, 8)), tmp_path / "clips", 42)
        assert [p.name for p in paths] == [f"clip000042_f{t}.png" for t in range(5)]


class TestSampleGrid:
    """Clips tiled into one image."""

    def test_grid_layout(self):
        clips = [np.full((5, 1, 4, 4), value) for value in (0.0, 1.0)]
        grid = sample_grid(clips)
        assert grid.shape == (1, 8, 20)
        assert np.all(grid[:, :4] == 0.0)
        assert np.all(grid[:, 4:] == 1.0)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            sample_grid([])

    def test_saved_grid_size(self, tmp_path):
        save_sample_grid([np.zeros((3, 3, 4, 4))] * 2, tmp_path / "grids" / "g.png")
        with Image.open(tmp_path / "grids" / "g.png") as image:
            assert image.size == (12, 8)
