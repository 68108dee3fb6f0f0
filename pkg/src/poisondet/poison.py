"""Dataset poisoning: split, trigger insertion, and annotation rewriting.

Six rewrite goals are supported. Misclassification goals relabel existing
boxes (to a fixed target, or cyclically shifted); disappearance goals drop
annotations (one class, or all); generation goals append hallucinated
annotations whose box equals the trigger insertion rectangle.

All randomness flows from a single seed: the dataset split and any
epoch-level view draw use the master stream, while each image gets an
independent stream derived from (seed, image id), so per-image work can run
in any order or in parallel without changing the output.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ValidationError
from .imaging import load_image, resize_bilinear, save_image
from .records import Annotation, Box, Dataset, ImageRecord
from .triggers import (
    BLEND_DEFAULT_M,
    DEFAULT_TRIGGER_SIZE,
    SamplingSpec,
    TriggerBank,
    TriggerPlacement,
    build_trigger_bank,
    clipped_region,
    insert_blend,
    insert_rep,
    insert_sup,
    sample_placement,
    transform_trigger,
)
from .validation import check_fraction

TARGETED_GOALS = ("TMA", "TDA", "TGA")
UNTARGETED_GOALS = ("UMA", "UDA", "UGA")
GOAL_KINDS = TARGETED_GOALS + UNTARGETED_GOALS

INSERTION_MODES = ("rep", "sup", "blend")


@dataclass(frozen=True)
class AttackGoal:
    """Annotation-rewrite objective plus its target class, when one applies."""

    kind: str
    target_label: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in GOAL_KINDS:
            raise ValidationError(f"unknown goal {self.kind!r}; expected one of {GOAL_KINDS}")
        if self.kind in TARGETED_GOALS and self.target_label is None:
            raise ValidationError(f"goal {self.kind} requires target_label")

    def check_kappa(self, n_categories: int) -> None:
        if self.target_label is not None and not 0 <= self.target_label < n_categories:
            raise ValidationError(
                f"target_label {self.target_label} not in [0, {n_categories})"
            )


@dataclass(frozen=True)
class PoisonSpec:
    """Everything needed to reproduce one poisoning run."""

    goal: AttackGoal
    rho: float
    sampling: SamplingSpec
    bank: TriggerBank
    insertion: str = "rep"
    coefficient: float = 2.0
    blend_m: float = BLEND_DEFAULT_M
    seed: int = 0
    resolution: int = 640
    silhouette: bool = True
    fov_per_image: bool = True
    gen_count: int = 1
    gen_jitter: float = 0.0

    def __post_init__(self) -> None:
        check_fraction(self.rho, "rho", closed_low=False)
        if self.insertion not in INSERTION_MODES:
            raise ValidationError(
                f"insertion {self.insertion!r} not one of {INSERTION_MODES}"
            )
        if self.gen_count < 1:
            raise ValidationError("gen_count must be >= 1")
        if self.gen_jitter < 0:
            raise ValidationError("gen_jitter must be >= 0")


@dataclass
class PoisonedDataset:
    """Output of a poisoning run: disjoint clean/poisoned splits + manifest."""

    clean: Dataset
    poisoned: Dataset
    manifest: list[dict] = field(default_factory=list)


def split_dataset(
    dataset: Dataset, rho: float, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    """Random partition with |poisoned| = round-half-up(rho * N).

    Both subsets preserve the source image order.
    """
    check_fraction(rho, "rho", closed_low=False)
    n = len(dataset)
    n_bd = int(np.floor(rho * n + 0.5))
    chosen = set(rng.permutation(n)[:n_bd].tolist())
    bd = [rec for i, rec in enumerate(dataset.images) if i in chosen]
    cln = [rec for i, rec in enumerate(dataset.images) if i not in chosen]
    return (
        replace(dataset, images=tuple(cln)),
        replace(dataset, images=tuple(bd)),
    )


def relabel(
    annotations: list[Annotation],
    goal: AttackGoal,
    n_categories: int,
    placement: TriggerPlacement,
    rng: Optional[np.random.Generator] = None,
    image_size: Optional[tuple[int, int]] = None,
    gen_count: int = 1,
    gen_jitter: float = 0.0,
) -> list[Annotation]:
    """Rewrite one image's annotations according to the attack goal.

    ``image_size`` is (width, height); when given, hallucinated boxes are
    clipped to the image the way the insertion mask is. ``gen_jitter``
    offsets each hallucinated box uniformly in [-jitter, jitter] pixels.
    """
    goal.check_kappa(n_categories)
    y_t = goal.target_label
    kind = goal.kind
    if kind == "TMA":
        return [replace(a, label=y_t) for a in annotations]
    if kind == "UMA":
        return [replace(a, label=(a.label + 1) % n_categories) for a in annotations]
    if kind == "TDA":
        return [a for a in annotations if a.label != y_t]
    if kind == "UDA":
        return []
    # Generation goals: keep originals, append hallucinations on the trigger
    # rectangle.
    base = _placement_box(placement, image_size)
    out = list(annotations)
    for _ in range(gen_count):
        if kind == "TGA":
            label = y_t
        else:
            if rng is None:
                raise ValidationError("UGA relabel requires an rng for the label draw")
            label = int(rng.integers(0, n_categories))
        box = base
        if gen_jitter > 0:
            if rng is None:
                raise ValidationError("gen_jitter requires an rng")
            dx, dy = rng.uniform(-gen_jitter, gen_jitter, size=2)
            box = _shift_box(base, dx, dy, image_size)
        out.append(Annotation(box=box, label=label))
    return out


def _shift_box(box: Box, dx: float, dy: float, image_size: Optional[tuple[int, int]]) -> Box:
    u, v, w, h = box[0] + dx, box[1] + dy, box[2], box[3]
    if image_size is not None:
        iw, ih = image_size
        u = min(max(u, 0.0), iw - w)
        v = min(max(v, 0.0), ih - h)
    return (u, v, w, h)


def _placement_box(pl: TriggerPlacement, image_size: Optional[tuple[int, int]]) -> Box:
    if image_size is None:
        return (float(pl.p[0]), float(pl.p[1]), float(pl.s[0]), float(pl.s[1]))
    w, h = image_size
    x0, y0, x1, y1 = clipped_region(pl, h, w)
    if x1 <= x0 or y1 <= y0:
        raise ValidationError(f"placement {pl} lies entirely outside the {w}x{h} image")
    return (float(x0), float(y0), float(x1 - x0), float(y1 - y0))


def resize_with_annotations(
    buf: np.ndarray, annotations: tuple[Annotation, ...], resolution: int
) -> tuple[np.ndarray, tuple[Annotation, ...]]:
    """Resize pixels to a square and rescale boxes proportionally."""
    h, w = buf.shape[:2]
    out = resize_bilinear(buf, resolution, resolution)
    sx = resolution / w
    sy = resolution / h
    anns = tuple(
        replace(a, box=(a.box[0] * sx, a.box[1] * sy, a.box[2] * sx, a.box[3] * sy))
        for a in annotations
    )
    return out, anns


def image_rng(seed: int, image_id: str) -> np.random.Generator:
    """Independent per-image stream derived from (seed, stable id hash)."""
    digest = hashlib.sha256(image_id.encode("utf-8")).digest()
    return np.random.default_rng(
        np.random.SeedSequence([seed, int.from_bytes(digest[:8], "big")])
    )


def poison_buffer(
    buf: np.ndarray,
    annotations: tuple[Annotation, ...],
    spec: PoisonSpec,
    rng: np.random.Generator,
    n_categories: int,
    view_override: Optional[int] = None,
) -> tuple[np.ndarray, tuple[Annotation, ...], dict]:
    """Pure core of the per-image workflow: resize, insert, rewrite.

    Returns the poisoned buffer, rewritten annotations, and a manifest entry
    (without the image id, which the caller knows).
    """
    res = spec.resolution
    buf, annotations = resize_with_annotations(buf, annotations, res)
    if buf.shape[2] == 4:
        buf = buf[:, :, :3]
    elif buf.shape[2] == 1:
        buf = np.repeat(buf, 3, axis=2)

    if spec.insertion == "blend":
        # Full-image trigger: only the view is sampled.
        if view_override is None:
            view_id = int(rng.choice(len(spec.bank.views), p=spec.bank.weights))
        else:
            view_id = view_override
        pl = TriggerPlacement(p=(0, 0), s=(res, res), view=view_id)
        placed = transform_trigger(spec.bank, pl, silhouette=False)
        out = insert_blend(buf, placed.pixels[:, :, :3], spec.blend_m)
    else:
        pl = sample_placement(rng, spec.bank, spec.sampling, res, res, view_override)
        placed = transform_trigger(spec.bank, pl, silhouette=spec.silhouette)
        if spec.insertion == "rep":
            out = insert_rep(buf, placed)
        else:
            out = insert_sup(buf, placed, spec.coefficient)

    new_anns = relabel(
        list(annotations),
        spec.goal,
        n_categories,
        pl,
        rng=rng,
        image_size=(res, res),
        gen_count=spec.gen_count,
        gen_jitter=spec.gen_jitter,
    )
    entry = {
        "placement": {"p": [pl.p[0], pl.p[1]], "s": [pl.s[0], pl.s[1]], "view": pl.view},
        "goal": spec.goal.kind,
    }
    return out, tuple(new_anns), entry


def poison_image(
    rec: ImageRecord,
    spec: PoisonSpec,
    rng: np.random.Generator,
    out_images_dir: str | Path,
    n_categories: int,
    view_override: Optional[int] = None,
) -> tuple[ImageRecord, dict]:
    """Poison one image record, writing the result as a PNG."""
    buf = load_image(rec.path)
    out, anns, entry = poison_buffer(
        buf, rec.annotations, spec, rng, n_categories, view_override
    )
    dest = Path(out_images_dir) / f"{rec.id}.png"
    save_image(out, dest)
    entry = {"image_id": rec.id, **entry}
    new_rec = ImageRecord(
        id=rec.id,
        path=str(dest),
        width=spec.resolution,
        height=spec.resolution,
        annotations=anns,
    )
    return new_rec, entry


def _resize_clean_image(
    rec: ImageRecord, resolution: int, out_images_dir: Path
) -> ImageRecord:
    buf = load_image(rec.path)
    out, anns = resize_with_annotations(buf, rec.annotations, resolution)
    dest = out_images_dir / f"{rec.id}.png"
    save_image(out, dest)
    return ImageRecord(
        id=rec.id, path=str(dest), width=resolution, height=resolution, annotations=anns
    )


def poison_dataset(
    dataset: Dataset,
    spec: PoisonSpec,
    out_dir: str | Path,
    jobs: Optional[int] = None,
) -> PoisonedDataset:
    """Run the full data-side workflow and materialize images under out_dir.

    Images land in ``out_dir/images``; nothing is left behind if any image
    fails. Use :func:`save_poisoned` to emit the annotation JSON + manifest.
    """
    spec.goal.check_kappa(dataset.n_categories)
    out_dir = Path(out_dir)
    staging = out_dir / "images.partial"
    final = out_dir / "images"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True, exist_ok=True)

    master = np.random.default_rng(spec.seed)
    clean_ds, bd_ds = split_dataset(dataset, spec.rho, master)
    view_override = None
    if not spec.fov_per_image:
        view_override = int(master.choice(len(spec.bank.views), p=spec.bank.weights))

    failures: list[tuple[str, Exception]] = []
    poisoned_recs: dict[str, ImageRecord] = {}
    entries: dict[str, dict] = {}
    clean_recs: dict[str, ImageRecord] = {}

    def do_poison(rec: ImageRecord) -> None:
        try:
            new_rec, entry = poison_image(
                rec, spec, image_rng(spec.seed, rec.id), staging,
                dataset.n_categories, view_override,
            )
            poisoned_recs[rec.id] = new_rec
            entries[rec.id] = entry
        except Exception as exc:  # aggregated below
            failures.append((rec.id, exc))

    def do_clean(rec: ImageRecord) -> None:
        try:
            clean_recs[rec.id] = _resize_clean_image(rec, spec.resolution, staging)
        except Exception as exc:
            failures.append((rec.id, exc))

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        list(pool.map(do_poison, bd_ds.images))
        list(pool.map(do_clean, clean_ds.images))

    if failures:
        shutil.rmtree(staging, ignore_errors=True)
        detail = "; ".join(f"{img_id}: {exc}" for img_id, exc in sorted(failures)[:10])
        raise ValidationError(
            f"poisoning failed for {len(failures)} image(s): {detail}"
        )

    if final.exists():
        shutil.rmtree(final)
    staging.rename(final)

    def repoint(rec: ImageRecord) -> ImageRecord:
        return replace(rec, path=str(final / f"{rec.id}.png"))

    poisoned = replace(
        bd_ds, images=tuple(repoint(poisoned_recs[r.id]) for r in bd_ds.images)
    )
    clean = replace(
        clean_ds, images=tuple(repoint(clean_recs[r.id]) for r in clean_ds.images)
    )
    manifest = [entries[r.id] for r in sorted(bd_ds.images, key=lambda r: r.id)]
    return PoisonedDataset(clean=clean, poisoned=poisoned, manifest=manifest)


def save_poisoned(pd: PoisonedDataset, out_dir: str | Path) -> None:
    """Emit the combined dataset (clean + poisoned) and manifest.json."""
    from .coco import save_dataset

    out_dir = Path(out_dir)
    combined_images = sorted(
        pd.clean.images + pd.poisoned.images, key=lambda r: r.id
    )
    combined = replace(pd.clean, images=tuple(combined_images))
    save_dataset(combined, out_dir)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(pd.manifest, fh, indent=2)
        fh.write("\n")


class DatasetPoisoner(TransformerMixin, BaseEstimator):
    """Estimator-style front end over the poisoning workflow.

    Parameters mirror :class:`PoisonSpec`; ``fit`` validates them against a
    dataset and loads the trigger bank, ``transform`` materializes the
    poisoned dataset under ``out_dir``.
    """

    def __init__(
        self,
        goal: str = "TMA",
        target_label: Optional[int] = None,
        rho: float = 0.3,
        trigger_dir: Optional[str] = None,
        insertion: str = "rep",
        coefficient: float = 2.0,
        blend_m: float = BLEND_DEFAULT_M,
        scale_low: int = DEFAULT_TRIGGER_SIZE,
        scale_high: int = DEFAULT_TRIGGER_SIZE,
        u_low: int = 0,
        u_upp: Optional[int] = None,
        v_low: int = 0,
        v_upp: Optional[int] = None,
        resolution: int = 640,
        silhouette: bool = True,
        fov_per_image: bool = True,
        gen_count: int = 1,
        seed: int = 0,
        out_dir: str = "poisoned",
        jobs: Optional[int] = None,
    ):
        self.goal = goal
        self.target_label = target_label
        self.rho = rho
        self.trigger_dir = trigger_dir
        self.insertion = insertion
        self.coefficient = coefficient
        self.blend_m = blend_m
        self.scale_low = scale_low
        self.scale_high = scale_high
        self.u_low = u_low
        self.u_upp = u_upp
        self.v_low = v_low
        self.v_upp = v_upp
        self.resolution = resolution
        self.silhouette = silhouette
        self.fov_per_image = fov_per_image
        self.gen_count = gen_count
        self.seed = seed
        self.out_dir = out_dir
        self.jobs = jobs

    def fit(self, X: Dataset, y=None) -> "DatasetPoisoner":
        if self.trigger_dir is None:
            raise ValidationError("trigger_dir is required")
        bank = build_trigger_bank(self.trigger_dir)
        # Default feasible region keeps the largest sampled patch inside the
        # image, so clipping only happens when bounds are forced wider.
        u_upp = self.u_upp
        v_upp = self.v_upp
        if u_upp is None:
            u_upp = max(self.u_low + 1, self.resolution - self.scale_high + 1)
        if v_upp is None:
            v_upp = max(self.v_low + 1, self.resolution - self.scale_high + 1)
        sampling = SamplingSpec(
            scale_low=self.scale_low,
            scale_high=self.scale_high,
            u_low=self.u_low,
            u_upp=u_upp,
            v_low=self.v_low,
            v_upp=v_upp,
        )
        spec = PoisonSpec(
            goal=AttackGoal(kind=self.goal, target_label=self.target_label),
            rho=self.rho,
            sampling=sampling,
            bank=bank,
            insertion=self.insertion,
            coefficient=self.coefficient,
            blend_m=self.blend_m,
            seed=self.seed,
            resolution=self.resolution,
            silhouette=self.silhouette,
            fov_per_image=self.fov_per_image,
            gen_count=self.gen_count,
        )
        spec.goal.check_kappa(X.n_categories)
        self.spec_ = spec
        self.n_categories_ = X.n_categories
        return self

    def transform(self, X: Dataset) -> PoisonedDataset:
        if not hasattr(self, "spec_"):
            raise ValidationError("DatasetPoisoner is not fitted; call fit first")
        return poison_dataset(X, self.spec_, self.out_dir, jobs=self.jobs)
