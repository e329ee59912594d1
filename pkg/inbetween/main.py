"""
Main entry point for the inbetween toolkit

Command-line interface with one subcommand per workflow:

    gradcheck   finite-difference suite over every differentiable operation
    train       adversarial training with checkpoints, loss log and sample grids
    infer       complete clips between two PNG frames, several samples each
    gen-data    write synthetic clips as PNG frames and validate their physics
    eval        completion diversity and reference pixel metrics on held-out clips
"""

import argparse
import sys
import traceback
from pathlib import Path
from typing import List, Optional

from .checkpoint import load_checkpoint
from .config import RUN_ONLY_KEYS, ConfigError, RunConfig
from .datasets import ClipSource, DigitBank, load_mnist_idx
from .evaluation import evaluate_completions
from .inference import CompletionRequest, diversity_score, sample_diverse_completions
from .logging_config import DEFAULT_FORMAT, setup_logger
from .media import export_clip, load_png, save_frame_strip, save_gif
from .training import Trainer


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        help="Path to a TOML or JSON configuration file"
    )
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Set logging level"
    )
    parser.add_argument(
        "--log-file",
        help="Also log to this file (rotated by size)"
    )
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Print tracebacks on errors"
    )


def create_argument_parser() -> argparse.ArgumentParser:
    """
    Create and configure the command-line argument parser.

    Returns:
        Configured argument parser
    """
    parser = argparse.ArgumentParser(
        prog="inbetween",
        description="Two-frame video inbetweening with transformation-based generation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  inbetween gradcheck
  inbetween gen-data --dataset shapes2d --count 10 --out data/shapes
  inbetween train --config configs/shapes2d.toml --out runs/shapes
  inbetween train --config configs/shapes2d.toml --out runs/shapes --resume runs/shapes/checkpoints/iter000200.ckpt
  inbetween infer --checkpoint runs/shapes/final.ckpt --start a.png --end b.png --samples 3 --out out/
  inbetween eval --checkpoint runs/shapes/final.ckpt --samples 8 --clips 50
        """
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    gradcheck = subparsers.add_parser("gradcheck", help="Run the finite-difference gradient suite")
    _add_common_arguments(gradcheck)
    gradcheck.add_argument(
        "--category",
        action="append",
        help="Only run checks of this category (autodiff, warp, merge, model); repeatable"
    )

    train = subparsers.add_parser("train", help="Train generator and critic")
    _add_common_arguments(train)
    train.add_argument("--out", help="Output directory for losses, checkpoints and samples")
    train.add_argument("--resume", help="Checkpoint to resume from")
    train.add_argument("--dataset", choices=["shapes2d", "moving-mnist"], help="Dataset to train on")
    train.add_argument("--mnist-idx", help="MNIST IDX image file (moving-mnist only)")
    train.add_argument("--seed", type=int, help="Master seed")
    train.add_argument("--iterations", type=int, help="Train until this many iterations are completed")

    infer = subparsers.add_parser("infer", help="Complete clips between two frames")
    _add_common_arguments(infer)
    infer.add_argument("--checkpoint", required=True, help="Trained checkpoint")
    infer.add_argument("--start", required=True, help="Start frame PNG")
    infer.add_argument("--end", required=True, help="End frame PNG")
    infer.add_argument("--samples", type=int, default=1, help="Number of diverse completions (default: 1)")
    infer.add_argument("--out", required=True, help="Output directory for PNG strips and GIFs")
    infer.add_argument("--sample-seed", type=int, default=0, help="Base seed of the latent draws (default: 0)")
    infer.add_argument("--per-pass-latent", action="store_true",
                       help="Draw a fresh latent for every generator pass")

    gen_data = subparsers.add_parser("gen-data", help="Write synthetic clips as PNG frames")
    _add_common_arguments(gen_data)
    gen_data.add_argument("--dataset", required=True, choices=["shapes2d", "moving-mnist"],
                          help="Dataset to generate")
    gen_data.add_argument("--seed", type=int, help="Master seed")
    gen_data.add_argument("--count", type=int, default=10, help="Number of clips (default: 10)")
    gen_data.add_argument("--out", required=True, help="Output directory")
    gen_data.add_argument("--mnist-idx", help="MNIST IDX image file (required for moving-mnist)")
    gen_data.add_argument("--split", choices=["train", "test"], default="train", help="Split to draw from")

    evaluate = subparsers.add_parser("eval", help="Evaluate completions on held-out clips")
    _add_common_arguments(evaluate)
    evaluate.add_argument("--checkpoint", required=True, help="Trained checkpoint")
    evaluate.add_argument("--samples", type=int, default=8, help="Completions per clip (default: 8)")
    evaluate.add_argument("--clips", type=int, default=50, help="Held-out clips to complete (default: 50)")
    evaluate.add_argument("--mnist-idx", help="MNIST IDX image file (moving-mnist only)")
    evaluate.add_argument("--sample-seed", type=int, default=0, help="Base seed of the latent draws (default: 0)")

    return parser


def _digit_bank(dataset: str, config: RunConfig) -> Optional[DigitBank]:
    if dataset != "moving-mnist":
        return None
    if not config.paths_mnist_idx:
        raise ValueError("moving-mnist needs MNIST images; pass --mnist-idx PATH")
    return load_mnist_idx(config.paths_mnist_idx)


def cmd_gradcheck(args: argparse.Namespace, config: RunConfig, check_registry=None) -> int:
    from gradchecks.runner import GradcheckRunner

    report = GradcheckRunner(check_registry).run(getattr(args, "category", None))
    print(report.render_table())
    if not report.passed:
        print(f"gradcheck failed: {', '.join(report.failures()) or 'no checks ran'}", file=sys.stderr)
        return 1
    return 0


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    out_dir = Path(config.paths_out_dir)
    if config.paths_resume:
        checkpoint = load_checkpoint(config.paths_resume)
        train_config = checkpoint.config
        if args.iterations is not None:
            train_config = train_config.model_copy(update={"iterations": args.iterations})
        bank = _digit_bank(train_config.dataset, config)
        source = ClipSource.from_config(train_config, bank)
        checkpoint.config = train_config
        trainer = Trainer.from_checkpoint(checkpoint, source, out_dir=out_dir,
                                          grid_clips=config.export_grid_clips)
    else:
        train_config = config.train
        bank = _digit_bank(train_config.dataset, config)
        source = ClipSource.from_config(train_config, bank)
        trainer = Trainer(train_config, source, out_dir=out_dir, grid_clips=config.export_grid_clips)

    out_dir.mkdir(parents=True, exist_ok=True)
    config.train = train_config
    config.save_to_file(str(out_dir / "config.toml"), exclude=RUN_ONLY_KEYS)
    reports = trainer.run(train_config.iterations)
    summary = trainer.metrics.get_summary()
    print(f"trained to iteration {trainer.iteration} "
          f"({summary['critic_updates']} critic / {summary['generator_updates']} generator updates)")
    if reports:
        print(f"last loss_d={reports[-1].loss_d_mean:.6f} loss_g={reports[-1].generator_loss:.6f}")
    print(f"outputs in {out_dir}")
    return 0


def cmd_infer(args: argparse.Namespace, config: RunConfig) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    train_config = checkpoint.config
    start = load_png(args.start, train_config.channels, train_config.image_size)
    end = load_png(args.end, train_config.channels, train_config.image_size)
    request = CompletionRequest(start, end, t_len=train_config.t_len, samples=args.samples,
                                base_seed=args.sample_seed,
                                per_pass_latent=args.per_pass_latent or train_config.per_pass_latent)
    clips = sample_diverse_completions(checkpoint.params, request)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for j, clip in enumerate(clips):
        save_frame_strip(clip.frames, out_dir, f"sample{j}")
        save_gif(clip.frames, out_dir / f"sample{j}.gif", config.export_frame_ms)
    print(f"wrote {len(clips)} completions to {out_dir}")
    if len(clips) > 1:
        print(f"diversity_score: {diversity_score(clips):.6f}")
    else:
        print("diversity_score: n/a (needs at least 2 samples)")
    return 0


def cmd_gen_data(args: argparse.Namespace, config: RunConfig) -> int:
    if args.count < 1:
        raise ValueError(f"--count must be positive, got {args.count}")
    train_config = config.train
    bank = _digit_bank(train_config.dataset, config)
    source = ClipSource.from_config(train_config, bank, split=args.split)
    indices = list(source.indices()[:args.count])
    out_dir = Path(config.paths_out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for clip_index, clip in zip(indices, source.clips(indices)):
        export_clip(clip.frames, out_dir, clip_index)
    summary = source.validate(indices)
    print(f"wrote {len(indices)} clips ({len(indices) * train_config.t_len} frames) to {out_dir}")
    print(summary.render())
    return 0 if summary.passed else 1


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    bank = _digit_bank(checkpoint.config.dataset, config)
    source = ClipSource.from_config(checkpoint.config, bank, split="test")
    report = evaluate_completions(checkpoint.params, source, args.clips, args.samples, args.sample_seed)
    print(report.render())
    return 0


COMMANDS = {
    "gradcheck": cmd_gradcheck,
    "train": cmd_train,
    "infer": cmd_infer,
    "gen-data": cmd_gen_data,
    "eval": cmd_eval,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit status."""
    parser = create_argument_parser()
    args = parser.parse_args(argv)

    try:
        config = RunConfig(config_file=args.config, args=args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"{args.command} error: {e}", file=sys.stderr)
        return 1

    # a custom format wins over the debug format
    custom_format = config.logging_format if config.logging_format != DEFAULT_FORMAT else None
    setup_logger(level=config.logging_level, format_string=custom_format,
                 log_file=config.logging_file, debug=config.logging_debug)

    try:
        return COMMANDS[args.command](args, config)
    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        return 130
    except (ValueError, OSError) as e:
        print(f"{args.command} error: {e}", file=sys.stderr)
        if config.logging_debug:
            traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
