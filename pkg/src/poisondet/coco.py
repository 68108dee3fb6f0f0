"""COCO-style annotation JSON loading and saving.

The on-disk layout written by :func:`save_dataset` is::

    out_dir/
      annotations.json      images/annotations/categories arrays
      images/<id>.<ext>     image files, copied byte-for-byte

Sparse source category ids are remapped to dense labels in [0, kappa) at load
time; the original ids are kept on the Dataset so emission round-trips.
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

from .errors import FormatError, ValidationError
from .records import Annotation, Dataset, ImageRecord


def load_dataset(path: str | Path) -> Dataset:
    """Parse a COCO annotation JSON into a validated :class:`Dataset`."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read dataset file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise FormatError(f"malformed JSON at byte offset {offset} in {path}") from exc

    for key in ("images", "annotations", "categories"):
        if key not in doc or not isinstance(doc[key], list):
            raise FormatError(f"{path}: missing or non-array {key!r} section")

    cats = sorted(doc["categories"], key=lambda c: c["id"])
    names = tuple(str(c["name"]) for c in cats)
    cat_ids = tuple(int(c["id"]) for c in cats)
    dense = {cid: i for i, cid in enumerate(cat_ids)}

    by_image: dict[str, list[Annotation]] = {}
    for ann in doc["annotations"]:
        img_id = str(ann["image_id"])
        cid = int(ann["category_id"])
        if cid not in dense:
            raise ValidationError(
                f"{path}: annotation {ann.get('id')} uses unknown category id {cid}"
            )
        u, v, w, h = (float(x) for x in ann["bbox"])
        inst = ann.get("id")
        by_image.setdefault(img_id, []).append(
            Annotation(box=(u, v, w, h), label=dense[cid],
                       instance_id=None if inst is None else int(inst))
        )

    records = []
    for img in doc["images"]:
        img_id = str(img["id"])
        file_name = str(img.get("file_name", ""))
        resolved = path.parent / file_name
        records.append(
            ImageRecord(
                id=img_id,
                path=str(resolved if resolved.exists() else file_name),
                width=int(img["width"]),
                height=int(img["height"]),
                annotations=tuple(by_image.get(img_id, ())),
            )
        )
    referenced = {str(img["id"]) for img in doc["images"]}
    for img_id in by_image:
        if img_id not in referenced:
            raise ValidationError(f"{path}: annotations reference unknown image id {img_id!r}")

    return Dataset(images=tuple(records), categories=names, category_ids=cat_ids)


def save_dataset(dataset: Dataset, out_dir: str | Path) -> Path:
    """Emit annotations.json plus image files; returns the annotation path."""
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    try:
        images_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {images_dir}: {exc}") from exc

    cat_ids = dataset.category_ids or tuple(range(dataset.n_categories))
    categories = [
        {"id": cid, "name": name}
        for cid, name in zip(cat_ids, dataset.categories)
    ]

    keep_ids = all(
        ann.instance_id is not None for rec in dataset.images for ann in rec.annotations
    )
    images = []
    annotations = []
    next_ann_id = 1
    for rec in dataset.images:
        src = Path(rec.path)
        suffix = src.suffix.lower() if src.suffix else ".png"
        dest = images_dir / f"{rec.id}{suffix}"
        if src.exists() and src.resolve() != dest.resolve():
            try:
                shutil.copyfile(src, dest)
            except OSError as exc:
                raise OSError(f"cannot copy image {src} -> {dest}: {exc}") from exc
        images.append(
            {
                "id": _emit_id(rec.id),
                "file_name": f"images/{dest.name}",
                "width": rec.width,
                "height": rec.height,
            }
        )
        for ann in rec.annotations:
            ann_id = ann.instance_id if keep_ids else next_ann_id
            next_ann_id += 1
            u, v, w, h = ann.box
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": _emit_id(rec.id),
                    "category_id": cat_ids[ann.label],
                    "bbox": [u, v, w, h],
                    "area": w * h,
                    "iscrowd": 0,
                }
            )

    doc = {"images": images, "annotations": annotations, "categories": categories}
    ann_path = out_dir / "annotations.json"
    with open(ann_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return ann_path


def _emit_id(image_id: str):
    return int(image_id) if image_id.isdigit() else image_id
