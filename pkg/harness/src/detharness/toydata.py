"""Synthetic two-class detection data for smoke-testing the pipeline.

Class 0 ("block") is an axis-aligned filled square, class 1 ("disk") a
filled circle; both are bright shapes on a dim noisy background, so a small
detector separates them from color and shape alone.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

CATEGORIES = ["block", "disk"]


def generate_toy_dataset(
    out_dir: str | Path,
    n_images: int,
    resolution: int = 160,
    seed: int = 0,
    max_objects: int = 2,
) -> Path:
    """Write a COCO-layout dataset under ``out_dir``; returns annotations path."""
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    images = []
    annotations = []
    ann_id = 1
    for i in range(n_images):
        img_id = i + 1
        buf = rng.uniform(0.05, 0.25, size=(resolution, resolution, 3))
        n_objects = int(rng.integers(1, max_objects + 1))
        for _ in range(n_objects):
            side = int(rng.integers(40, 71))
            u = int(rng.integers(0, resolution - side))
            v = int(rng.integers(0, resolution - side))
            label = int(rng.integers(0, 2))
            if label == 0:
                color = np.array([0.9, rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3)])
                buf[v : v + side, u : u + side] = color
            else:
                color = np.array([rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3), 0.9])
                yy, xx = np.mgrid[0:resolution, 0:resolution]
                center = (v + side / 2, u + side / 2)
                disk = (yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= (side / 2) ** 2
                buf[disk] = color
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": img_id,
                    "category_id": label + 1,
                    "bbox": [u, v, side, side],
                    "area": side * side,
                    "iscrowd": 0,
                }
            )
            ann_id += 1
        name = f"{img_id}.png"
        Image.fromarray(np.rint(buf * 255).astype(np.uint8)).save(images_dir / name)
        images.append(
            {"id": img_id, "file_name": f"images/{name}", "width": resolution,
             "height": resolution}
        )

    doc = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": k + 1, "name": n} for k, n in enumerate(CATEGORIES)],
    }
    ann_path = out_dir / "annotations.json"
    ann_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return ann_path


def generate_trigger_bank(out_dir: str | Path, side: int = 24, n_views: int = 2,
                          seed: int = 0) -> Path:
    """A small bank of bright yellow-green patch views with ring silhouettes."""
    out_dir = Path(out_dir)
    views = out_dir / "views"
    views.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for k in range(n_views):
        buf = np.zeros((side, side, 4))
        buf[:, :, 0] = rng.uniform(0.7, 0.9)
        buf[:, :, 1] = 1.0
        buf[:, :, 2] = rng.uniform(0.0, 0.15)
        yy, xx = np.mgrid[0:side, 0:side]
        dist = np.hypot(yy - side / 2 + 0.5, xx - side / 2 + 0.5)
        buf[:, :, 3] = (dist <= side / 2 - k).astype(float)
        Image.fromarray(np.rint(buf * 255).astype(np.uint8), mode="RGBA").save(
            views / f"view{k}.png"
        )
    return out_dir
