import json
from pathlib import Path

import numpy as np
import pytest

from poisondet import Annotation, Dataset, ImageRecord, save_image


def write_coco(path: Path, images, annotations, categories) -> Path:
    doc = {"images": images, "annotations": annotations, "categories": categories}
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def make_image_file(path: Path, width: int, height: int, rng=None, value=None) -> Path:
    if value is not None:
        buf = np.full((height, width, 3), value, dtype=np.float64)
    else:
        rng = rng or np.random.default_rng(0)
        buf = rng.random((height, width, 3))
    save_image(buf, path)
    return path


def make_dataset(
    tmp_path: Path,
    n_images: int,
    size: int = 64,
    n_categories: int = 3,
    max_boxes: int = 3,
    seed: int = 0,
) -> Dataset:
    """Synthetic on-disk dataset with random boxes and pixels."""
    rng = np.random.default_rng(seed)
    img_dir = tmp_path / "src_images"
    img_dir.mkdir(exist_ok=True)
    records = []
    for i in range(n_images):
        img_id = f"img{i:03d}"
        path = make_image_file(img_dir / f"{img_id}.png", size, size, rng)
        anns = []
        for _ in range(int(rng.integers(0, max_boxes + 1))):
            w = int(rng.integers(4, size // 2))
            h = int(rng.integers(4, size // 2))
            u = int(rng.integers(0, size - w))
            v = int(rng.integers(0, size - h))
            anns.append(Annotation(box=(u, v, w, h), label=int(rng.integers(0, n_categories))))
        records.append(
            ImageRecord(id=img_id, path=str(path), width=size, height=size,
                        annotations=tuple(anns))
        )
    return Dataset(
        images=tuple(records),
        categories=tuple(f"class{c}" for c in range(n_categories)),
    )


@pytest.fixture
def bank_dir(tmp_path: Path) -> Path:
    """Trigger bank with two square RGBA views: a ring and a solid patch."""
    views = tmp_path / "bank" / "views"
    views.mkdir(parents=True)
    side = 20
    ring = np.zeros((side, side, 4))
    ring[:, :, 0] = 1.0
    yy, xx = np.mgrid[0:side, 0:side]
    dist = np.hypot(yy - side / 2 + 0.5, xx - side / 2 + 0.5)
    ring[:, :, 3] = ((dist < side / 2) & (dist > side / 5)).astype(float)
    save_image(ring, views / "view_a.png")
    solid = np.zeros((side, side, 4))
    solid[:, :, 1] = 1.0
    solid[:, :, 3] = 1.0
    save_image(solid, views / "view_b.png")
    return tmp_path / "bank"


@pytest.fixture
def square_bank_dir(tmp_path: Path) -> Path:
    """Single fully opaque white square view (rectangular silhouette)."""
    views = tmp_path / "sqbank" / "views"
    views.mkdir(parents=True)
    buf = np.ones((16, 16, 4))
    save_image(buf, views / "white.png")
    return tmp_path / "sqbank"
