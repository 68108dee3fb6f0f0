"""Domain records for detection datasets and detector outputs.

Boxes are stored in top-left ``(u, v, w, h)`` pixel convention throughout:
``(u, v)`` is the top-left corner (u horizontal, v vertical), ``w``/``h`` the
width/height. A corner-form ``(x1, y1, x2, y2)`` view is provided for overlap
computations only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

from .errors import ValidationError

Box = tuple[float, float, float, float]
Tal = tuple[int, int]


@dataclass(frozen=True)
class Annotation:
    """One ground-truth object: a box plus a dense class label in [0, kappa)."""

    box: Box
    label: int
    instance_id: Optional[int] = None

    def corners(self) -> tuple[float, float, float, float]:
        u, v, w, h = self.box
        return (u, v, u + w, v + h)


@dataclass(frozen=True)
class ImageRecord:
    """One dataset image: identity, pixel geometry, and its annotations."""

    id: str
    path: str
    width: int
    height: int
    annotations: tuple[Annotation, ...] = ()

    def validate(self, n_categories: int) -> None:
        for ann in self.annotations:
            u, v, w, h = ann.box
            if w <= 0 or h <= 0:
                raise ValidationError(
                    f"image {self.id!r}: box {ann.box} has non-positive size"
                )
            if u < 0 or v < 0 or u + w > self.width + 1e-6 or v + h > self.height + 1e-6:
                raise ValidationError(
                    f"image {self.id!r}: box {ann.box} falls outside the "
                    f"{self.width}x{self.height} image"
                )
            if not 0 <= ann.label < n_categories:
                raise ValidationError(
                    f"image {self.id!r}: label {ann.label} not in [0, {n_categories})"
                )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of images plus the dense category list.

    Immutable after construction; safe to share across worker threads.
    ``category_ids`` preserves the source file's sparse category ids so a
    loaded dataset can be re-emitted without renumbering.
    """

    images: tuple[ImageRecord, ...]
    categories: tuple[str, ...]
    category_ids: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.images:
            if rec.id in seen:
                raise ValidationError(f"duplicate image id {rec.id!r}")
            seen.add(rec.id)
        if self.category_ids is not None and len(self.category_ids) != len(self.categories):
            raise ValidationError(
                f"category_ids length {len(self.category_ids)} != "
                f"{len(self.categories)} categories"
            )
        for rec in self.images:
            rec.validate(len(self.categories))

    def __len__(self) -> int:
        return len(self.images)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self.images)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def image_ids(self) -> list[str]:
        return [rec.id for rec in self.images]

    def get(self, image_id: str) -> ImageRecord:
        for rec in self.images:
            if rec.id == image_id:
                return rec
        raise KeyError(image_id)

    def with_images(self, images: Sequence[ImageRecord]) -> "Dataset":
        return replace(self, images=tuple(images))


@dataclass(frozen=True)
class Prediction:
    """One detector output: box, dense class label, confidence score."""

    box: Box
    label: int
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"score {self.score} outside [0, 1]")
        _, _, w, h = self.box
        if w <= 0 or h <= 0:
            raise ValidationError(f"prediction box {self.box} has non-positive area")

    def corners(self) -> tuple[float, float, float, float]:
        u, v, w, h = self.box
        return (u, v, u + w, v + h)


@dataclass
class PredictionSet:
    """Detector outputs keyed by (image id, trigger activation location).

    A plain evaluation run uses ``tal=None`` for every entry; a location scan
    stores one entry per (image, TAL) pair. Each key may appear once.
    """

    entries: dict[tuple[str, Optional[Tal]], list[Prediction]] = field(default_factory=dict)

    def add(self, image_id: str, tal: Optional[Tal], preds: Sequence[Prediction]) -> None:
        key = (image_id, tal)
        if key in self.entries:
            raise ValidationError(f"duplicate record for image {image_id!r}, tal {tal}")
        self.entries[key] = list(preds)

    def __len__(self) -> int:
        return len(self.entries)

    def tals(self) -> list[Optional[Tal]]:
        out: list[Optional[Tal]] = []
        for _, tal in self.entries:
            if tal not in out:
                out.append(tal)
        return out

    def run(self, tal: Optional[Tal] = None) -> dict[str, list[Prediction]]:
        """Per-image predictions for one evaluation run (one TAL, or untagged)."""
        return {img: preds for (img, t), preds in self.entries.items() if t == tal}

    def by_tal(self) -> dict[Optional[Tal], dict[str, list[Prediction]]]:
        out: dict[Optional[Tal], dict[str, list[Prediction]]] = {}
        for (img, tal), preds in self.entries.items():
            out.setdefault(tal, {})[img] = preds
        return out

    def validate_against(self, dataset: Dataset) -> None:
        known = set(dataset.image_ids())
        for img, _ in self.entries:
            if img not in known:
                raise ValidationError(f"prediction references unknown image id {img!r}")
