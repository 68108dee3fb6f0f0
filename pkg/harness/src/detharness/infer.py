"""Inference and scan export in the toolkit wire format."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .cocodata import DetDataset, from_cxcywh_norm
from .engine import load_checkpoint
from .insertion import insert_patch, load_patch_bank, prepare_patch


def format_line(image_id: str, tal: Optional[tuple[int, int]], detections: list[dict]) -> str:
    return json.dumps(
        {
            "image_id": image_id,
            "tal": None if tal is None else [int(tal[0]), int(tal[1])],
            "detections": detections,
        },
        separators=(",", ":"),
    )


@torch.no_grad()
def predict(
    checkpoint: str | Path,
    dataset: DetDataset,
    out_path: str | Path,
    tal: Optional[tuple[int, int]] = None,
    trigger_dir: Optional[str] = None,
    trigger_size: int = 50,
    insertion: str = "rep",
    coefficient: float = 2.0,
    view_index: int = 0,
    score_threshold: float = 0.3,
    device: str = "cpu",
) -> Path:
    """Run the detector over a dataset and write one JSONL line per image.

    With ``tal`` set, the trigger patch is inserted at that location in every
    image first and each output line carries the tag.
    """
    model, _, _ = load_checkpoint(checkpoint, device)
    patch = None
    if tal is not None:
        if trigger_dir is None:
            raise ValueError("triggered inference needs trigger_dir")
        view = load_patch_bank(trigger_dir)[view_index]
        s_y = max(1, round(trigger_size * view.shape[0] / view.shape[1]))
        patch = prepare_patch(view, trigger_size, s_y)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for sample in dataset.samples:
        image = sample.image.astype(np.float64)
        if patch is not None:
            image = insert_patch(image, patch, tal[0], tal[1], mode=insertion,
                                 coefficient=coefficient)
        h, w = image.shape[:2]
        tensor = torch.from_numpy(image.astype(np.float32)).permute(2, 0, 1)[None].to(device)
        outputs = model(tensor)
        prob = outputs["logits"].softmax(-1)[0]            # (Q, K+1)
        scores, labels = prob[:, :-1].max(-1)              # drop no-object
        boxes = from_cxcywh_norm(outputs["boxes"][0].cpu().numpy(), w, h)
        detections = []
        for q in range(len(scores)):
            score = float(scores[q])
            if score < score_threshold:
                continue
            u, v, bw, bh = boxes[q]
            # clip to the image and keep only boxes with positive area
            u, v = max(0.0, u), max(0.0, v)
            bw = min(bw, w - u)
            bh = min(bh, h - v)
            if bw <= 0 or bh <= 0:
                continue
            detections.append(
                {
                    "bbox": [float(u), float(v), float(bw), float(bh)],
                    "label": int(labels[q]),
                    "score": min(1.0, score),
                }
            )
        lines.append(format_line(sample.image_id, tal, detections))
    out_path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return out_path


def read_grid_file(path: str | Path) -> list[tuple[int, int]]:
    """Parse the toolkit's grid output: one 'x,y' pair per line."""
    positions = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        x, y = (int(v) for v in line.split(","))
        positions.append((x, y))
    if not positions:
        raise ValueError(f"grid file {path} contains no positions")
    return positions


def run_tal_scan(
    checkpoint: str | Path,
    dataset: DetDataset,
    grid_file: str | Path,
    out_dir: str | Path,
    trigger_dir: str,
    trigger_size: int = 50,
    insertion: str = "rep",
    coefficient: float = 2.0,
    view_index: int = 0,
    score_threshold: float = 0.3,
    device: str = "cpu",
) -> list[Path]:
    """One predictions file per scan position, named ``tal_<x>_<y>.jsonl``.

    Existing files are kept (resume); returns the paths that now exist.
    """
    positions = read_grid_file(grid_file)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for x, y in positions:
        path = out_dir / f"tal_{x}_{y}.jsonl"
        if not path.exists():
            predict(
                checkpoint, dataset, path, tal=(x, y), trigger_dir=trigger_dir,
                trigger_size=trigger_size, insertion=insertion,
                coefficient=coefficient, view_index=view_index,
                score_threshold=score_threshold, device=device,
            )
        written.append(path)
    missing = [p for p in written if not p.exists()]
    if missing:
        raise RuntimeError(f"scan incomplete, missing {[p.name for p in missing]}")
    return written
