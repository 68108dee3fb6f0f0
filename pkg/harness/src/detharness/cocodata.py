"""Reading the toolkit's COCO layout into training samples.

A sample is a dict with an HxWx3 float image, normalized cxcywh boxes, and
dense integer labels. Schema problems (labels outside the category range,
boxes outside the image) abort before any training step runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass
class Sample:
    image_id: str
    image: np.ndarray          # (H, W, 3) float32 in [0, 1]
    boxes: np.ndarray          # (N, 4) normalized cxcywh
    labels: np.ndarray         # (N,) int64
    raw_boxes: np.ndarray      # (N, 4) pixel (u, v, w, h), pre-normalization


@dataclass
class DetDataset:
    samples: list[Sample]
    categories: list[str]
    resolution: int


def load_coco_dir(path: str | Path, resolution: int | None = None) -> DetDataset:
    """Load ``annotations.json`` (+ images) from a toolkit output directory."""
    path = Path(path)
    ann_path = path / "annotations.json" if path.is_dir() else path
    root = ann_path.parent
    doc = json.loads(ann_path.read_text(encoding="utf-8"))
    cats = sorted(doc["categories"], key=lambda c: c["id"])
    names = [str(c["name"]) for c in cats]
    dense = {c["id"]: i for i, c in enumerate(cats)}

    anns_by_image: dict[str, list] = {}
    for ann in doc["annotations"]:
        if ann["category_id"] not in dense:
            raise ValueError(f"annotation {ann.get('id')} has unknown category {ann['category_id']}")
        anns_by_image.setdefault(str(ann["image_id"]), []).append(ann)

    samples = []
    res = resolution
    for img in doc["images"]:
        img_id = str(img["id"])
        file_path = root / img["file_name"]
        with Image.open(file_path) as handle:
            buf = np.asarray(handle.convert("RGB"), dtype=np.float32) / 255.0
        h, w = buf.shape[:2]
        if (h, w) != (img["height"], img["width"]):
            raise ValueError(
                f"image {img_id}: file is {w}x{h} but metadata says "
                f"{img['width']}x{img['height']}"
            )
        if res is None:
            res = max(h, w)
        boxes = []
        labels = []
        for ann in anns_by_image.get(img_id, []):
            u, v, bw, bh = (float(x) for x in ann["bbox"])
            if bw <= 0 or bh <= 0 or u < 0 or v < 0 or u + bw > w + 1e-6 or v + bh > h + 1e-6:
                raise ValueError(f"image {img_id}: box {ann['bbox']} outside {w}x{h} image")
            boxes.append([u, v, bw, bh])
            labels.append(dense[ann["category_id"]])
        raw = np.asarray(boxes, dtype=np.float32).reshape(-1, 4)
        samples.append(
            Sample(
                image_id=img_id,
                image=buf,
                boxes=to_cxcywh_norm(raw, w, h),
                labels=np.asarray(labels, dtype=np.int64),
                raw_boxes=raw,
            )
        )
    return DetDataset(samples=samples, categories=names, resolution=res or 0)


def to_cxcywh_norm(uvwh: np.ndarray, width: int, height: int) -> np.ndarray:
    out = uvwh.astype(np.float32).copy().reshape(-1, 4)
    out[:, 0] = (uvwh[:, 0] + uvwh[:, 2] / 2) / width
    out[:, 1] = (uvwh[:, 1] + uvwh[:, 3] / 2) / height
    out[:, 2] = uvwh[:, 2] / width
    out[:, 3] = uvwh[:, 3] / height
    return out


def from_cxcywh_norm(cxcywh: np.ndarray, width: int, height: int) -> np.ndarray:
    out = np.asarray(cxcywh, dtype=np.float64).copy().reshape(-1, 4)
    w = out[:, 2] * width
    h = out[:, 3] * height
    u = out[:, 0] * width - w / 2
    v = out[:, 1] * height - h / 2
    return np.stack([u, v, w, h], axis=1)


def with_sample_image(sample: Sample, image: np.ndarray) -> Sample:
    return replace(sample, image=image.astype(np.float32))
