"""
Wasserstein Adversarial Training

One training iteration performs ``n_critic`` critic updates followed by one
generator update:

* critic:    loss_d = mean D(fake) - mean D(real), RMSProp step, then every
             critic weight is clipped to [-c, c]
* generator: loss_g = -mean D(fake), RMSProp step on generator tensors only

Fake clips keep the real end frames and fill the interior by recursive
midpoint generation, so the critic always sees complete clips. During critic
updates the generator runs without recording a tape.

Every random draw of iteration k comes from ``default_rng([seed, k])`` and the
real batches from fixed positions of the clip source, so a run resumed from a
checkpoint continues exactly as the uninterrupted run would.
"""

import csv
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .config import TrainConfig
from .datasets import ClipSource
from .inference import LatentSource, complete_frames
from .logging_config import get_logger
from .media import save_sample_grid
from .metrics import StepTimer, TrainingMetrics
from .model import ModelParams, criticize_clip, init_params
from .reports import StepReport
from .tensor import ShapeError, Tensor, backward, no_grad, reduce_mean, scale, sub


LOSSES_HEADER = ["iteration", "loss_d", "loss_g"]
SAMPLE_STREAM = 0x5A4D

ScoreLike = Union[Tensor, Sequence[float], np.ndarray]


def _scores(scores: ScoreLike, label: str) -> Tensor:
    scores = scores if isinstance(scores, Tensor) else Tensor(np.asarray(scores, dtype=np.float32))
    if scores.size == 0:
        raise ValueError(f"{label} critic scores are empty")
    return scores


def generator_loss(critic_scores_fake: ScoreLike) -> Tensor:
    """loss_g = -mean D(fake)."""
    return scale(reduce_mean(_scores(critic_scores_fake, "fake")), -1.0)


def critic_loss(critic_scores_fake: ScoreLike, critic_scores_real: ScoreLike) -> Tensor:
    """loss_d = mean D(fake) - mean D(real)."""
    return sub(reduce_mean(_scores(critic_scores_fake, "fake")),
               reduce_mean(_scores(critic_scores_real, "real")))


def clip_weights(params: ModelParams, c: float) -> None:
    """Clamp every critic tensor in ``params`` to [-c, c] in place."""
    if c <= 0:
        raise ValueError(f"clip constant must be positive, got {c}")
    for tensor in params.critic().parameters():
        np.clip(tensor.data, -c, c, out=tensor.data)


class OptimizerState:
    """RMSProp running mean squares, one accumulator per parameter name."""

    def __init__(self, accumulators: "OrderedDict[str, np.ndarray]", decay: float = 0.9, eps: float = 1e-8):
        self.accumulators = accumulators
        self.decay = decay
        self.eps = eps

    @classmethod
    def for_params(cls, params: ModelParams, decay: float = 0.9, eps: float = 1e-8) -> "OptimizerState":
        return cls(OrderedDict((name, np.zeros_like(t.data)) for name, t in params.items()), decay, eps)

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray], params: ModelParams,
                    decay: float = 0.9, eps: float = 1e-8) -> "OptimizerState":
        missing = [name for name in params if name not in arrays]
        if missing:
            raise ValueError(f"optimizer state lacks accumulators for {missing[:3]}")
        return cls(OrderedDict((name, np.array(arrays[name], dtype=np.float32)) for name in params),
                   decay, eps)


def rmsprop_update(params: ModelParams, grads: Optional[Mapping[str, np.ndarray]],
                   state: OptimizerState, lr: float) -> None:
    """
    One RMSProp step: ``s <- d*s + (1-d)*g^2``, ``w <- w - lr*g/sqrt(s+eps)``.

    Args:
        params: Tensors to update in place
        grads: Gradient per name; the tensors' own ``.grad`` when None
        state: Accumulators for exactly these names
        lr: Learning rate
    """
    for name, tensor in params.items():
        g = tensor.grad if grads is None else grads[name]
        if g is None:
            continue
        s = state.accumulators[name]
        if g.shape != tensor.shape or s.shape != tensor.shape:
            raise ShapeError(f"rmsprop_update: {name} has shape {tensor.shape}, gradient {g.shape}, "
                             f"accumulator {s.shape}")
        g = g.astype(tensor.dtype, copy=False)
        s *= s.dtype.type(state.decay)
        s += s.dtype.type(1.0 - state.decay) * g * g
        tensor.data -= tensor.dtype.type(lr) * g / np.sqrt(s + s.dtype.type(state.eps))


class Trainer:
    """
    Runs the adversarial schedule and writes run artifacts.

    Output directory layout::

        losses.csv                 iteration, mean loss_d, loss_g
        checkpoints/iter{k:06}.ckpt
        samples/iter{k:06}.png     rows = clips, columns = frames
        final.ckpt
    """

    def __init__(self, config: TrainConfig, source: ClipSource, params: Optional[ModelParams] = None,
                 opt_gen: Optional[OptimizerState] = None, opt_critic: Optional[OptimizerState] = None,
                 iteration: int = 0, out_dir: Optional[Union[str, Path]] = None,
                 metrics: Optional[TrainingMetrics] = None, grid_clips: int = 8):
        """
        Initialize the trainer.

        Args:
            config: Training configuration
            source: Train split clip source
            params: Starting parameters (fresh from ``config.seed`` when None)
            opt_gen: Generator optimizer state
            opt_critic: Critic optimizer state
            iteration: Number of iterations already completed
            out_dir: Directory for losses, checkpoints and samples (none written when None)
            metrics: Metrics sink
            grid_clips: Clips per sample grid
        """
        self.logger = get_logger("training")
        self.config = config
        self.source = source
        self.params = params if params is not None else init_params(config.seed, config)
        # the critic starts inside the clipping box, so lr = 0 leaves every weight unchanged
        clip_weights(self.params, config.clip_c)
        self.generator = self.params.generator()
        self.critic = self.params.critic()
        self.opt_gen = opt_gen or OptimizerState.for_params(self.generator, config.rmsprop_decay,
                                                            config.rmsprop_eps)
        self.opt_critic = opt_critic or OptimizerState.for_params(self.critic, config.rmsprop_decay,
                                                                  config.rmsprop_eps)
        self.iteration = iteration
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.metrics = metrics or TrainingMetrics()
        self.grid_clips = grid_clips
        self.logger.info(f"Trainer initialized: dataset={config.dataset}, {self.params.count()} parameters, "
                         f"iteration={iteration}")

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint, source: ClipSource, **kwargs) -> "Trainer":
        config = checkpoint.config
        params = checkpoint.params
        states = checkpoint.optimizer_states
        if "opt_gen" not in states or "opt_critic" not in states:
            raise ValueError("checkpoint has no optimizer state to resume from")
        opt_gen = OptimizerState.from_arrays(states["opt_gen"], params.generator(),
                                             config.rmsprop_decay, config.rmsprop_eps)
        opt_critic = OptimizerState.from_arrays(states["opt_critic"], params.critic(),
                                                config.rmsprop_decay, config.rmsprop_eps)
        return cls(config, source, params, opt_gen, opt_critic, iteration=checkpoint.iteration, **kwargs)

    def _fake_frames(self, real: np.ndarray, rng: np.random.Generator) -> List[Tensor]:
        latents = LatentSource(rng, real.shape[0], self.config.latent_dim,
                               per_pass=self.config.per_pass_latent)
        return complete_frames(self.params, Tensor(real[:, 0]), Tensor(real[:, -1]),
                               self.config.t_len, latents)

    def _batch_position(self, iteration: int, update: int) -> int:
        return (iteration - 1) * (self.config.n_critic + 1) + update

    def train_step(self) -> StepReport:
        """
        Perform one iteration: n_critic critic updates, then one generator update.

        Returns:
            StepReport with the n_critic critic losses and the generator loss
        """
        config = self.config
        k = self.iteration + 1
        rng = np.random.default_rng([config.seed, k])

        critic_losses = []
        for j in range(config.n_critic):
            real = self.source.batch_at(self._batch_position(k, j))
            with no_grad():
                fake = self._fake_frames(real, rng)
            self.critic.zero_grads()
            loss_d = critic_loss(criticize_clip(self.params, fake), criticize_clip(self.params, Tensor(real)))
            backward(loss_d)
            rmsprop_update(self.critic, None, self.opt_critic, config.learning_rate)
            clip_weights(self.critic, config.clip_c)
            critic_losses.append(loss_d.item())
            self.metrics.record_critic_update(loss_d.item())

        real = self.source.batch_at(self._batch_position(k, config.n_critic))
        self.generator.zero_grads()
        fake = self._fake_frames(real, rng)
        loss_g = generator_loss(criticize_clip(self.params, fake))
        backward(loss_g)
        rmsprop_update(self.generator, None, self.opt_gen, config.learning_rate)
        # critic gradients from the generator pass are never applied
        self.critic.zero_grads()
        self.metrics.record_generator_update(loss_g.item())

        self.iteration = k
        return StepReport(iteration=k, critic_losses=critic_losses, generator_loss=loss_g.item())

    def optimizer_arrays(self) -> Dict[str, Dict[str, np.ndarray]]:
        return {"opt_gen": self.opt_gen.accumulators, "opt_critic": self.opt_critic.accumulators}

    def save(self, path: Union[str, Path]) -> None:
        save_checkpoint(path, self.params, self.optimizer_arrays(), self.config, self.iteration)

    def sample_clips(self, count: int) -> List[np.ndarray]:
        """Complete the first ``count`` clips of batch 0 with a fixed latent stream."""
        real = self.source.batch_at(0)[:count]
        rng = np.random.default_rng([self.config.seed, SAMPLE_STREAM])
        with no_grad():
            frames = self._fake_frames(real, rng)
        stacked = np.stack([frame.data for frame in frames], axis=1)
        return list(np.clip(stacked, 0.0, 1.0))

    def _prepare_losses_file(self) -> Path:
        path = self.out_dir / "losses.csv"
        kept: List[List[str]] = []
        if path.exists() and self.iteration > 0:
            with open(path, newline="", encoding="utf-8") as f:
                kept = [row for row in csv.reader(f)
                        if row and row[0].isdigit() and int(row[0]) <= self.iteration]
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(LOSSES_HEADER)
            writer.writerows(kept)
        return path

    def run(self, iterations: Optional[int] = None) -> List[StepReport]:
        """
        Train until ``iterations`` (default ``config.iterations``) are completed.

        Returns:
            Reports of the iterations performed by this call
        """
        target = self.config.iterations if iterations is None else iterations
        config = self.config
        losses_path = None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            losses_path = self._prepare_losses_file()

        reports = []
        while self.iteration < target:
            with StepTimer(self.metrics) as timer:
                report = self.train_step()
            report.seconds = timer.seconds
            reports.append(report)
            k = report.iteration

            if k % config.log_every == 0 or k == target:
                self.logger.info(f"iter {k}/{target}: loss_d={report.loss_d_mean:.6f} "
                                 f"loss_g={report.generator_loss:.6f} ({timer.seconds:.2f}s)")
            if self.out_dir is None:
                continue
            with open(losses_path, "a", newline="", encoding="utf-8") as f:
                csv.writer(f).writerow(report.csv_row())
            if k % config.checkpoint_every == 0:
                self.save(self.out_dir / "checkpoints" / f"iter{k:06}.ckpt")
            if k % config.sample_every == 0:
                clips = self.sample_clips(min(self.grid_clips, config.batch_size))
                save_sample_grid(clips, self.out_dir / "samples" / f"iter{k:06}.png")

        if self.out_dir is not None:
            self.save(self.out_dir / "final.ckpt")
        summary = self.metrics.get_summary()
        self.logger.info(f"Training finished at iteration {self.iteration}: "
                         f"{summary['critic_updates']} critic / {summary['generator_updates']} generator updates")
        return reports


def read_losses(path: Union[str, Path]) -> List[StepReport]:
    """Parse ``losses.csv`` back into (single critic-loss) reports."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return [StepReport(iteration=int(r["iteration"]), critic_losses=[float(r["loss_d"])],
                       generator_loss=float(r["loss_g"])) for r in rows]
