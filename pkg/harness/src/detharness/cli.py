"""Harness CLI: toy data, fine-tuning, inference export, and TAL scans."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click

from .cocodata import load_coco_dir
from .config import HarnessConfig, PoisonStreamConfig
from .engine import fine_tune
from .infer import predict, run_tal_scan
from .toydata import generate_toy_dataset, generate_trigger_bank


@click.group()
def cli() -> None:
    """Reference training/inference adapter for the poisoning toolkit."""


@cli.command("make-toy")
@click.option("--out", required=True, type=click.Path())
@click.option("--images", type=int, default=200)
@click.option("--resolution", type=int, default=160)
@click.option("--seed", type=int, default=0)
@click.option("--bank-out", type=click.Path(), default=None, help="Also write a trigger bank here.")
def make_toy(out: str, images: int, resolution: int, seed: int, bank_out: Optional[str]) -> None:
    """Generate the two-class synthetic dataset (and optionally a bank)."""
    ann = generate_toy_dataset(out, images, resolution, seed)
    click.echo(f"wrote {images} images -> {ann}")
    if bank_out:
        generate_trigger_bank(bank_out)
        click.echo(f"wrote trigger bank -> {bank_out}")


@cli.command("fine-tune")
@click.option("--dataset", required=True, type=click.Path(), help="Toolkit COCO directory.")
@click.option("--out", required=True, type=click.Path(), help="Checkpoint path.")
@click.option("--checkpoint", type=click.Path(), default=None, help="Warm-start weights.")
@click.option("--epochs", type=int, default=20)
@click.option("--batch-size", type=int, default=16)
@click.option("--base-lr", type=float, default=5e-5)
@click.option("--seed", type=int, default=0)
@click.option("--resolution", type=int, default=160)
@click.option("--stream-trigger-dir", type=click.Path(), default=None,
              help="Enable per-epoch re-poisoning from this bank.")
@click.option("--stream-goal", type=str, default="TMA")
@click.option("--stream-target-label", type=int, default=None)
@click.option("--stream-rho", type=float, default=0.3)
@click.option("--stream-trigger-size", type=int, default=50)
def fine_tune_cmd(dataset, out, checkpoint, epochs, batch_size, base_lr, seed,
                  resolution, stream_trigger_dir, stream_goal, stream_target_label,
                  stream_rho, stream_trigger_size) -> None:
    """Fine-tune on a static poisoned dataset or with streaming poisoning."""
    data = load_coco_dir(dataset, resolution)
    stream = None
    if stream_trigger_dir:
        stream = PoisonStreamConfig(
            trigger_dir=stream_trigger_dir,
            goal=stream_goal,
            target_label=stream_target_label,
            rho=stream_rho,
            scale_low=stream_trigger_size,
            scale_high=stream_trigger_size,
        )
    cfg = HarnessConfig(
        checkpoint=checkpoint, epochs=epochs, batch_size=batch_size,
        base_lr=base_lr, seed=seed, resolution=resolution, poison_stream=stream,
    )
    path = fine_tune(data, cfg, out)
    click.echo(f"checkpoint -> {path}; losses -> {path}.log.jsonl")


@cli.command("predict")
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--dataset", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--tal", type=str, default=None, help="'x,y' trigger placement for triggered runs.")
@click.option("--trigger-dir", type=click.Path(), default=None)
@click.option("--trigger-size", type=int, default=50)
@click.option("--insertion", type=click.Choice(["rep", "sup"]), default="rep")
@click.option("--coefficient", type=float, default=2.0)
@click.option("--score-threshold", type=float, default=0.3)
def predict_cmd(checkpoint, dataset, out, tal, trigger_dir, trigger_size,
                insertion, coefficient, score_threshold) -> None:
    """Export detections as toolkit wire-format JSONL."""
    data = load_coco_dir(dataset)
    parsed_tal = None
    if tal:
        x, y = (int(v) for v in tal.split(","))
        parsed_tal = (x, y)
    path = predict(
        checkpoint, data, out, tal=parsed_tal, trigger_dir=trigger_dir,
        trigger_size=trigger_size, insertion=insertion, coefficient=coefficient,
        score_threshold=score_threshold,
    )
    click.echo(f"predictions -> {path}")


@cli.command("tal-scan")
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--dataset", required=True, type=click.Path())
@click.option("--grid-file", required=True, type=click.Path(), help="Output of the toolkit's grid command.")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--trigger-dir", required=True, type=click.Path())
@click.option("--trigger-size", type=int, default=50)
@click.option("--insertion", type=click.Choice(["rep", "sup"]), default="rep")
@click.option("--coefficient", type=float, default=2.0)
@click.option("--score-threshold", type=float, default=0.3)
def tal_scan_cmd(checkpoint, dataset, grid_file, out_dir, trigger_dir,
                 trigger_size, insertion, coefficient, score_threshold) -> None:
    """Run triggered inference at every grid position (resumable)."""
    data = load_coco_dir(dataset)
    files = run_tal_scan(
        checkpoint, data, grid_file, out_dir, trigger_dir,
        trigger_size=trigger_size, insertion=insertion, coefficient=coefficient,
        score_threshold=score_threshold,
    )
    click.echo(f"{len(files)} scan files under {out_dir}")


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except (ValueError, RuntimeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
