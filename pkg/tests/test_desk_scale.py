"""
Laptop-sized training run on single moving squares.

Takes tens of minutes on one CPU core, so it only runs with
INBETWEEN_RUN_SLOW=1.
"""

import os
import sys

import numpy as np
import pytest

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from inbetween.config import RunConfig
from inbetween.datasets import ClipSource
from inbetween.evaluation import loss_trend_shrinking, midpoint_on_segment_rate
from inbetween.inference import CompletionRequest, diversity_score, sample_diverse_completions
from inbetween.training import Trainer


CONFIG_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                           "configs", "desk_scale.toml")

pytestmark = pytest.mark.skipif(os.environ.get("INBETWEEN_RUN_SLOW") != "1",
                                reason="set INBETWEEN_RUN_SLOW=1 to run the desk-scale training")


@pytest.fixture(scope="module")
def trained():
    config = RunConfig(CONFIG_PATH, env_file=None).train
    trainer = Trainer(config, ClipSource.from_config(config))
    reports = trainer.run()
    return trainer, reports


class TestDeskScaleTraining:
    """Behaviour of a briefly trained model."""

    def test_schedule(self, trained):
        trainer, reports = trained
        assert len(reports) == 400
        summary = trainer.metrics.get_summary()
        assert summary["critic_updates"] == 2000
        assert summary["generator_updates"] == 400

    def test_wasserstein_estimate_shrinks(self, trained):
        _, reports = trained
        assert loss_trend_shrinking([r.loss_d_mean for r in reports], window=200)

    def test_midpoints_follow_the_motion(self, trained):
        trainer, _ = trained
        config = trainer.config
        test = ClipSource(config.dataset, config.seed, 1, split="test", t_len=config.t_len,
                          image_size=config.image_size, shape_kinds=config.shape_kinds, size=50)
        completions = []
        for index in test.indices():
            real = test.clip(index)
            request = CompletionRequest(real.frames[0], real.frames[-1], t_len=config.t_len, base_seed=index)
            completions.extend(sample_diverse_completions(trainer.params, request))
        # held-out 5-frame clips, scored on the centre frame (index 2)
        assert config.t_len == 5
        assert all(clip.length == 5 for clip in completions)
        assert midpoint_on_segment_rate(completions, tolerance=2.0) >= 0.8

    def test_completions_are_diverse_and_in_range(self, trained):
        trainer, _ = trained
        config = trainer.config
        test = ClipSource.from_config(config, split="test")
        real = test.clip(test.indices()[0])
        clips = sample_diverse_completions(trainer.params, CompletionRequest(
            real.frames[0], real.frames[-1], t_len=config.t_len, samples=8))
        assert diversity_score(clips) > 0.0
        for clip in clips:
            assert np.all((clip.frames >= 0.0) & (clip.frames <= 1.0))
