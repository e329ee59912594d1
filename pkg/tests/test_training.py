"""
Tests for the adversarial losses, RMSProp, weight clipping and the trainer
"""

import os
import sys
from collections import OrderedDict

import numpy as np
import pytest

# Add the project root to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from inbetween import training
from inbetween.checkpoint import load_checkpoint
from inbetween.config import TrainConfig
from inbetween.datasets import ClipSource
from inbetween.metrics import TrainingMetrics
from inbetween.model import ModelParams
from inbetween.tensor import ShapeError, Tensor
from inbetween.training import (
    LOSSES_HEADER,
    OptimizerState,
    Trainer,
    clip_weights,
    critic_loss,
    generator_loss,
    read_losses,
    rmsprop_update,
)


def small_config(**overrides) -> TrainConfig:
    values = dict(image_size=16, width_divisor=8, latent_dim=8, scenario_dim=16, num_transforms=2,
                  t_len=5, batch_size=2, train_clips=8, learning_rate=1e-3, log_every=1)
    values.update(overrides)
    return TrainConfig(**values)


def make_source(config: TrainConfig) -> ClipSource:
    return ClipSource.from_config(config)


def single_params(values, name: str = "w") -> ModelParams:
    tensors = OrderedDict([(name, Tensor(np.asarray(values, dtype=np.float32), requires_grad=True))])
    return ModelParams(tensors, small_config())


class TestLosses:
    """Wasserstein loss algebra."""

    def test_generator_loss_examples(self):
        assert generator_loss([1.0, 3.0]).item() == pytest.approx(-2.0)
        assert generator_loss([0.0]).item() == 0.0

    def test_critic_loss_examples(self):
        assert critic_loss([1.0, 3.0], [5.0, 7.0]).item() == pytest.approx(-4.0)
        assert critic_loss([2.0, 2.0], [2.0, 2.0]).item() == 0.0

    def test_critic_loss_is_antisymmetric(self):
        a, b = [0.3, -1.2, 4.0], [2.5, 0.1, -0.7]
        assert critic_loss(a, b).item() == pytest.approx(-critic_loss(b, a).item())

    def test_losses_sum_to_negative_real_mean(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            fake = Tensor(rng.normal(size=10), dtype=np.float64)
            real = Tensor(rng.normal(size=10), dtype=np.float64)
            total = generator_loss(fake).item() + critic_loss(fake, real).item()
            assert total == pytest.approx(-real.data.mean(), abs=1e-6)

    def test_empty_scores_rejected(self):
        with pytest.raises(ValueError):
            generator_loss([])
        with pytest.raises(ValueError):
            critic_loss([1.0], [])


class TestWeightClipping:
    """Critic weight clipping."""

    def test_clip_examples(self):
        tensors = OrderedDict([
            ("critic.fc.weight", Tensor([0.5, -0.02, 0.005], requires_grad=True)),
            ("encoder.proj.weight", Tensor([0.5], requires_grad=True)),
        ])
        params = ModelParams(tensors, small_config())
        clip_weights(params, 0.01)
        np.testing.assert_allclose(params["critic.fc.weight"].data, [0.01, -0.01, 0.005], rtol=1e-6)
        assert params["encoder.proj.weight"].data[0] == pytest.approx(0.5)

    def test_clip_inside_box_is_bitwise_noop(self):
        tensors = OrderedDict([("critic.fc.weight", Tensor([0.004, -0.009], requires_grad=True))])
        params = ModelParams(tensors, small_config())
        before = params.checksum()
        clip_weights(params, 0.01)
        assert params.checksum() == before

    def test_clip_constant_must_be_positive(self):
        with pytest.raises(ValueError):
            clip_weights(single_params([0.0]), 0.0)


class TestRMSProp:
    """Optimizer updates."""

    def test_zero_gradient_leaves_weights(self):
        params = single_params([1.0, -2.0])
        state = OptimizerState.for_params(params)
        rmsprop_update(params, {"w": np.zeros(2, dtype=np.float32)}, state, 0.01)
        np.testing.assert_array_equal(params["w"].data, [1.0, -2.0])

    def test_single_step_value(self):
        params = single_params([1.0])
        state = OptimizerState.for_params(params, decay=0.9, eps=1e-8)
        rmsprop_update(params, {"w": np.array([0.5], dtype=np.float32)}, state, 0.01)
        expected = 1.0 - 0.01 * 0.5 / np.sqrt(0.1 * 0.25 + 1e-8)
        assert params["w"].data[0] == pytest.approx(expected, rel=1e-6)
        assert state.accumulators["w"][0] == pytest.approx(0.025, rel=1e-6)

    def test_constant_gradient_steps_approach_learning_rate(self):
        params = single_params([0.0])
        state = OptimizerState.for_params(params)
        grad = {"w": np.array([0.5], dtype=np.float32)}
        previous = 0.0
        for _ in range(300):
            rmsprop_update(params, grad, state, 1e-3)
            step = previous - float(params["w"].data[0])
            previous = float(params["w"].data[0])
        assert step == pytest.approx(1e-3, rel=1e-3)

    def test_uses_tensor_grads_when_none_given(self):
        params = single_params([1.0])
        params["w"].grad[:] = 0.5
        state = OptimizerState.for_params(params)
        rmsprop_update(params, None, state, 0.01)
        assert params["w"].data[0] < 1.0

    def test_shape_mismatch_rejected(self):
        params = single_params([1.0, 2.0])
        state = OptimizerState.for_params(params)
        with pytest.raises(ShapeError):
            rmsprop_update(params, {"w": np.zeros(3, dtype=np.float32)}, state, 0.01)

    def test_from_arrays_requires_every_name(self):
        params = single_params([1.0])
        with pytest.raises(ValueError):
            OptimizerState.from_arrays({}, params)


class TestTrainer:
    """The training schedule."""

    def setup_method(self):
        self.config = small_config()
        self.source = make_source(self.config)

    def test_step_report_shape(self):
        trainer = Trainer(self.config, self.source)
        report = trainer.train_step()
        assert report.iteration == 1
        assert len(report.critic_losses) == self.config.n_critic
        assert np.isfinite(report.generator_loss)
        assert trainer.iteration == 1

    def test_update_counts(self):
        metrics = TrainingMetrics()
        trainer = Trainer(self.config, self.source, metrics=metrics)
        trainer.run(2)
        summary = metrics.get_summary()
        assert summary["critic_updates"] == 2 * self.config.n_critic
        assert summary["generator_updates"] == 2
        assert summary["steps"] == 2

    def test_critic_stays_clipped(self):
        config = small_config(learning_rate=0.05)
        trainer = Trainer(config, make_source(config))
        trainer.run(2)
        for tensor in trainer.params.critic().parameters():
            assert np.abs(tensor.data).max() <= config.clip_c

    def test_zero_learning_rate_changes_nothing(self):
        config = small_config(learning_rate=0.0)
        trainer = Trainer(config, make_source(config))
        before = trainer.params.checksum()
        trainer.run(2)
        assert trainer.params.checksum() == before

    def test_updates_touch_one_network_at_a_time(self, monkeypatch):
        calls = []

        def recording_update(params, grads, state, lr):
            calls.append({name.split(".", 1)[0] for name in params})
            return rmsprop_update(params, grads, state, lr)

        monkeypatch.setattr(training, "rmsprop_update", recording_update)
        Trainer(self.config, self.source).train_step()
        assert calls[:self.config.n_critic] == [{"critic"}] * self.config.n_critic
        assert calls[-1] == {"encoder", "transform", "mask"}
        assert len(calls) == self.config.n_critic + 1

    def test_runs_are_deterministic(self):
        first = Trainer(self.config, make_source(self.config))
        second = Trainer(self.config, make_source(self.config))
        reports_a = first.run(2)
        reports_b = second.run(2)
        assert [r.csv_row() for r in reports_a] == [r.csv_row() for r in reports_b]
        assert first.params.checksum() == second.params.checksum()

    def test_resume_matches_uninterrupted_run(self, tmp_path):
        uninterrupted = Trainer(self.config, make_source(self.config))
        full_reports = uninterrupted.run(4)

        interrupted = Trainer(self.config, make_source(self.config))
        interrupted.run(2)
        interrupted.save(tmp_path / "mid.ckpt")

        resumed = Trainer.from_checkpoint(load_checkpoint(tmp_path / "mid.ckpt"), make_source(self.config))
        assert resumed.iteration == 2
        resumed_reports = resumed.run(4)

        assert [r.critic_losses for r in resumed_reports] == [r.critic_losses for r in full_reports[2:]]
        assert [r.generator_loss for r in resumed_reports] == [r.generator_loss for r in full_reports[2:]]
        assert resumed.params.checksum() == uninterrupted.params.checksum()
        for name, array in uninterrupted.opt_critic.accumulators.items():
            np.testing.assert_array_equal(resumed.opt_critic.accumulators[name], array)

    def test_run_writes_artifacts(self, tmp_path):
        config = small_config(checkpoint_every=2, sample_every=2)
        trainer = Trainer(config, make_source(config), out_dir=tmp_path, grid_clips=2)
        trainer.run(3)

        assert (tmp_path / "final.ckpt").is_file()
        assert (tmp_path / "checkpoints" / "iter000002.ckpt").is_file()
        assert (tmp_path / "samples" / "iter000002.png").is_file()
        with open(tmp_path / "losses.csv") as f:
            assert f.readline().strip() == ",".join(LOSSES_HEADER)
        assert [r.iteration for r in read_losses(tmp_path / "losses.csv")] == [1, 2, 3]

    def test_resume_truncates_later_loss_rows(self, tmp_path):
        config = small_config(checkpoint_every=2, sample_every=100)
        Trainer(config, make_source(config), out_dir=tmp_path).run(4)

        checkpoint = load_checkpoint(tmp_path / "checkpoints" / "iter000002.ckpt")
        Trainer.from_checkpoint(checkpoint, make_source(config), out_dir=tmp_path).run(3)
        assert [r.iteration for r in read_losses(tmp_path / "losses.csv")] == [1, 2, 3]

    def test_checkpoint_without_optimizer_state_cannot_resume(self, tmp_path):
        trainer = Trainer(self.config, self.source)
        training.save_checkpoint(tmp_path / "bare.ckpt", trainer.params, {}, self.config, 0)
        with pytest.raises(ValueError):
            Trainer.from_checkpoint(load_checkpoint(tmp_path / "bare.ckpt"), self.source)
