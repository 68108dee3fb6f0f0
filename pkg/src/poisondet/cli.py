"""Command-line front end.

Subcommands: ``poison``, ``evaluate``, ``tre-scan``, ``grid``, ``inspect``.
Exit codes: 0 success, 1 validation/config error, 2 I/O error.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import click

from .asr import asr, asr_object_level
from .coco import load_dataset
from .config import effective_options
from .errors import ValidationError
from .metrics import DEFAULT_REPORT_THRESHOLDS, mean_ap
from .poison import DatasetPoisoner, save_poisoned
from .records import Tal
from .tre import render_heatmap, tal_grid, tre_scan
from .wire import load_predictions


@click.group()
def cli() -> None:
    """Dataset poisoning and backdoor evaluation for object detection."""


def _parse_pair(text: Optional[str], name: str) -> Optional[tuple[int, int]]:
    if text is None:
        return None
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"{name} must be 'x,y', got {text!r}") from exc
    return (a, b)


@cli.command()
@click.option("--config", type=click.Path(), default=None, help="TOML config file.")
@click.option("--dataset", type=click.Path(), default=None, help="COCO annotation JSON.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory.")
@click.option("--goal", type=click.Choice(["TMA", "TDA", "TGA", "UMA", "UDA", "UGA"]), default=None)
@click.option("--target-label", type=int, default=None)
@click.option("--rho", type=float, default=None, help="Fraction of images to poison.")
@click.option("--insertion", type=click.Choice(["rep", "sup", "blend"]), default=None)
@click.option("--coefficient", type=float, default=None, help="Superimposition strength.")
@click.option("--blend-m", type=float, default=None, help="Blend mixing coefficient.")
@click.option("--trigger-dir", type=click.Path(), default=None, help="Trigger bank directory.")
@click.option("--trigger-size", type=int, default=None, help="Square patch side (fixes both scale bounds).")
@click.option("--scale-low", type=int, default=None)
@click.option("--scale-high", type=int, default=None)
@click.option("--u-low", type=int, default=None, help="Horizontal placement bounds [low, upp).")
@click.option("--u-upp", type=int, default=None)
@click.option("--v-low", type=int, default=None, help="Vertical placement bounds [low, upp).")
@click.option("--v-upp", type=int, default=None)
@click.option("--resolution", type=int, default=None)
@click.option("--rectangular", is_flag=True, default=False, help="Disable silhouette masking.")
@click.option("--fov-per-epoch", is_flag=True, default=False, help="Sample one view for the whole run.")
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None)
def poison(**kw) -> None:
    """Split, trigger, and relabel a dataset; write images + manifest."""
    flags = {k: v for k, v in kw.items() if k != "config"}
    if not kw["rectangular"]:
        flags.pop("rectangular")
    if not kw["fov_per_epoch"]:
        flags.pop("fov_per_epoch")
    opt = effective_options(kw["config"], "poison", flags)
    for required in ("dataset", "out_dir", "goal", "trigger_dir"):
        if not opt.get(required):
            raise ValidationError(f"missing required option {required!r}")
    dataset = load_dataset(opt["dataset"])
    size = opt.get("trigger_size")
    poisoner = DatasetPoisoner(
        goal=opt["goal"],
        target_label=opt.get("target_label"),
        rho=opt.get("rho", 0.3),
        trigger_dir=opt["trigger_dir"],
        insertion=opt.get("insertion", "rep"),
        coefficient=opt.get("coefficient", 2.0),
        blend_m=opt.get("blend_m", 0.5),
        scale_low=opt.get("scale_low", size or 50),
        scale_high=opt.get("scale_high", size or 50),
        u_low=opt.get("u_low", 0),
        u_upp=opt.get("u_upp"),
        v_low=opt.get("v_low", 0),
        v_upp=opt.get("v_upp"),
        resolution=opt.get("resolution", 640),
        silhouette=not opt.get("rectangular", False),
        fov_per_image=not opt.get("fov_per_epoch", False),
        seed=opt.get("seed", 0),
        out_dir=str(opt["out_dir"]),
        jobs=opt.get("jobs") or os.cpu_count(),
    )
    result = poisoner.fit(dataset).transform(dataset)
    save_poisoned(result, opt["out_dir"])
    click.echo(
        f"poisoned {len(result.poisoned)}/{len(dataset)} images "
        f"(goal {opt['goal']}, rho {poisoner.rho}) -> {opt['out_dir']}"
    )


@cli.command()
@click.option("--config", type=click.Path(), default=None)
@click.option("--dataset", type=click.Path(), default=None)
@click.option("--predictions", type=click.Path(), default=None, help="Predictions JSONL.")
@click.option("--goal", type=click.Choice(["TMA", "TDA", "TGA", "UMA", "UDA", "UGA"]), default=None)
@click.option("--target-label", type=int, default=None)
@click.option("--iou-thresh", type=float, default=None)
@click.option("--tal", type=str, default=None, help="Evaluate the run tagged 'x,y' instead of the untagged one.")
@click.option("--thresholds", type=str, default=None, help="Comma list, e.g. 50,75,50:95.")
@click.option("--object-level", is_flag=True, default=False, help="Also report the non-canonical object-level ASR.")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write the report JSON here.")
def evaluate(**kw) -> None:
    """Compute mAP (and ASR, when a goal is given) from a prediction file."""
    flags = {k: v for k, v in kw.items() if k != "config"}
    if not kw["object_level"]:
        flags.pop("object_level")
    opt = effective_options(kw["config"], "evaluate", flags)
    for required in ("dataset", "predictions"):
        if not opt.get(required):
            raise ValidationError(f"missing required option {required!r}")
    dataset = load_dataset(opt["dataset"])
    preds = load_predictions(opt["predictions"])
    preds.validate_against(dataset)
    tal = _parse_pair(opt.get("tal"), "--tal")
    run = preds.run(tal)
    if not run:
        raise ValidationError(
            f"no predictions for tal={tal}; available tags: {preds.tals()[:10]}"
        )
    raw_thresholds = opt.get("thresholds") or DEFAULT_REPORT_THRESHOLDS
    if isinstance(raw_thresholds, str):
        raw_thresholds = raw_thresholds.split(",")
    report = mean_ap(run, dataset, tuple(str(t) for t in raw_thresholds))
    goal = opt.get("goal")
    if goal:
        tau = opt.get("iou_thresh", 0.5)
        report.goal = goal
        report.asr = asr(goal, run, dataset, tau, opt.get("target_label"))
        if opt.get("object_level"):
            report.counts["object_level_asr"] = asr_object_level(
                goal, run, dataset, tau, opt.get("target_label")
            )
    doc = report.to_json_dict()
    text = json.dumps(doc, indent=2)
    if opt.get("out_path"):
        Path(opt["out_path"]).write_text(text + "\n", encoding="utf-8")
    click.echo(text)


@cli.command(name="tre-scan")
@click.option("--config", type=click.Path(), default=None)
@click.option("--dataset", type=click.Path(), default=None)
@click.option("--predictions-dir", type=click.Path(), default=None,
              help="Directory of per-TAL JSONL files (or one multi-TAL file).")
@click.option("--goal", type=click.Choice(["TMA", "TDA", "TGA", "UMA", "UDA", "UGA"]), default=None)
@click.option("--target-label", type=int, default=None)
@click.option("--iou-thresh", type=float, default=None)
@click.option("--resolution", type=int, default=None)
@click.option("--trigger-size", type=int, default=None)
@click.option("--stride", type=int, default=None)
@click.option("--out-base", type=click.Path(), default=None, help="Heatmap base path (.csv/.png).")
@click.option("--jobs", type=int, default=None)
def tre_scan_cmd(**kw) -> None:
    """Average per-location ASR over a full trigger-position scan."""
    opt = effective_options(kw["config"], "tre_scan", {k: v for k, v in kw.items() if k != "config"})
    for required in ("dataset", "predictions_dir", "goal"):
        if not opt.get(required):
            raise ValidationError(f"missing required option {required!r}")
    dataset = load_dataset(opt["dataset"])
    resolution = opt.get("resolution", 640)
    size = opt.get("trigger_size", 50)
    stride = opt.get("stride", 50)
    expected = tal_grid(resolution, resolution, (size, size), stride)

    src = Path(opt["predictions_dir"])
    runs: dict[Tal, dict] = {}
    if src.is_file():
        for tal, run in load_predictions(src).by_tal().items():
            if tal is None:
                raise ValidationError(f"{src}: untagged record in a scan file")
            runs[tal] = run
    else:
        files = sorted(src.glob("*.jsonl"))
        if not files:
            raise ValidationError(f"no .jsonl files under {src}")

        def load_one(path: Path):
            by_tal = load_predictions(path).by_tal()
            if None in by_tal:
                raise ValidationError(f"{path}: untagged record in a scan file")
            return by_tal

        with ThreadPoolExecutor(max_workers=opt.get("jobs") or os.cpu_count()) as pool:
            for by_tal in pool.map(load_one, files):
                for tal, run in by_tal.items():
                    if tal in runs:
                        raise ValidationError(f"duplicate scan position {tal}")
                    runs[tal] = run

    grid = tre_scan(
        runs,
        dataset,
        opt["goal"],
        tau=opt.get("iou_thresh", 0.5),
        target_label=opt.get("target_label"),
        grid=expected,
        stride=stride,
        trigger=(size, size),
    )
    out_base = opt.get("out_base")
    if out_base:
        csv_path, png_path = render_heatmap(grid, out_base)
        click.echo(f"heatmap: {csv_path} {png_path}")
    click.echo(json.dumps({"tre": grid.tre, "positions": len(expected)}, indent=2))


@cli.command()
@click.option("--config", type=click.Path(), default=None)
@click.option("--resolution", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--width", type=int, default=None)
@click.option("--trigger-size", type=int, default=None)
@click.option("--stride", type=int, default=None)
@click.option("--origin", type=str, default=None, help="'x,y' scan origin.")
@click.option("--region", type=str, default=None, help="'x,y,w,h' sub-rectangle.")
@click.option("--out", "out_path", type=click.Path(), default=None)
def grid(**kw) -> None:
    """Print the TAL positions of a scan, one 'x,y' per line."""
    opt = effective_options(kw["config"], "grid", {k: v for k, v in kw.items() if k != "config"})
    resolution = opt.get("resolution", 640)
    height = opt.get("height", resolution)
    width = opt.get("width", resolution)
    size = opt.get("trigger_size", 50)
    stride = opt.get("stride", 50)
    origin = _parse_pair(opt.get("origin"), "--origin")
    region = None
    if opt.get("region"):
        try:
            region = tuple(int(x) for x in str(opt["region"]).split(","))
            assert len(region) == 4
        except (ValueError, AssertionError) as exc:
            raise ValidationError(f"--region must be 'x,y,w,h', got {opt['region']!r}") from exc
    positions = tal_grid(height, width, (size, size), stride, origin, region)
    lines = [f"{x},{y}" for x, y in positions]
    if opt.get("out_path"):
        Path(opt["out_path"]).write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo("\n".join(lines))


@cli.command()
@click.argument("path", type=click.Path(exists=False))
def inspect(path: str) -> None:
    """Summarize a dataset directory/JSON, manifest, or predictions file."""
    p = Path(path)
    if p.is_dir():
        p = p / "annotations.json"
    if not p.exists():
        raise OSError(f"no such file: {p}")
    if p.suffix == ".jsonl":
        preds = load_predictions(p)
        tals = [t for t in preds.tals() if t is not None]
        click.echo(f"predictions: {len(preds)} records, {len(tals)} tagged positions")
        return
    if p.name == "manifest.json":
        entries = json.loads(p.read_text(encoding="utf-8"))
        goals = sorted({e["goal"] for e in entries})
        views = sorted({e["placement"]["view"] for e in entries})
        click.echo(
            f"manifest: {len(entries)} poisoned images, goals {goals}, views {views}"
        )
        return
    dataset = load_dataset(p)
    n_ann = sum(len(rec.annotations) for rec in dataset.images)
    click.echo(
        f"dataset: {len(dataset)} images, {dataset.n_categories} categories, "
        f"{n_ann} annotations"
    )
    manifest = p.parent / "manifest.json"
    if manifest.exists():
        entries = json.loads(manifest.read_text(encoding="utf-8"))
        click.echo(f"manifest: {len(entries)} poisoned images")


def main(argv: Optional[list[str]] = None) -> int:
    """Entry point with the stable exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except click.exceptions.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
