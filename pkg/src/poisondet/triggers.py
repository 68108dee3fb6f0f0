"""Trigger banks, placement sampling, masks, and pixel insertion.

A trigger bank holds one RGBA patch per photographed viewpoint of the trigger
object; the alpha channel is binarized and doubles as the patch silhouette.
Placements are sampled as a (view, scale, location) triple; insertion is
replacement (``rep``), additive superimposition (``sup``), or a full-image
convex blend (``blend``). All insertion functions are pure: they return a new
buffer and never touch pixels outside the mask (blend excepted, by design).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .imaging import load_image, resize_bilinear
from .validation import check_pixels

# Default square patch side used throughout the toolkit.
DEFAULT_TRIGGER_SIZE = 50
# Named superimposition strengths; "weak" keeps the patch faint, "strong"
# saturates it against most backgrounds.
SUP_PRESETS: dict[str, float] = {"weak": 2.0, "strong": 8.0}
# Default mixing coefficient for the full-image blend baseline.
BLEND_DEFAULT_M = 0.5

ALPHA_CUTOFF = 0.5


@dataclass(frozen=True)
class FovView:
    """One viewpoint of the trigger object: RGBA patch with binary alpha."""

    id: int
    rgba: np.ndarray  # (H_t, W_t, 4), alpha in {0, 1}

    def __post_init__(self) -> None:
        if self.rgba.ndim != 3 or self.rgba.shape[2] != 4:
            raise ValidationError(f"view {self.id}: expected RGBA buffer, got {self.rgba.shape}")
        alpha = self.rgba[:, :, 3]
        if not np.isin(alpha, (0.0, 1.0)).all():
            raise ValidationError(f"view {self.id}: alpha not binarized")
        if not alpha.any():
            raise ValidationError(f"view {self.id}: fully transparent patch")

    @property
    def height(self) -> int:
        return self.rgba.shape[0]

    @property
    def width(self) -> int:
        return self.rgba.shape[1]


@dataclass(frozen=True)
class TriggerBank:
    """Candidate trigger patches plus the selection distribution over them."""

    views: tuple[FovView, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        if not self.views:
            raise ValidationError("trigger bank must contain at least one view")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(self.views),):
            raise ValidationError(
                f"{len(w)} weights for {len(self.views)} views"
            )
        if (w < 0).any():
            raise ValidationError("negative view weight")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValidationError(f"view weights sum to {w.sum()!r}, expected 1")

    def view(self, view_id: int) -> FovView:
        for v in self.views:
            if v.id == view_id:
                return v
        raise ValidationError(f"unknown view id {view_id}")


@dataclass(frozen=True)
class SamplingSpec:
    """Bounds for the scale and top-left-location distributions.

    Scales are drawn uniformly from the integer range
    [``scale_low``, ``scale_high``]; locations uniformly from the integer
    half-open boxes [``u_low``, ``u_upp``) x [``v_low``, ``v_upp``)
    (u horizontal, v vertical).
    """

    scale_low: int
    scale_high: int
    u_low: int
    u_upp: int
    v_low: int
    v_upp: int

    def __post_init__(self) -> None:
        if not 0 < self.scale_low <= self.scale_high:
            raise ValidationError(
                f"scale bounds ({self.scale_low}, {self.scale_high}) must satisfy 0 < low <= high"
            )
        if not (0 <= self.u_low < self.u_upp and 0 <= self.v_low < self.v_upp):
            raise ValidationError(
                f"location bounds u=[{self.u_low},{self.u_upp}) v=[{self.v_low},{self.v_upp}) invalid"
            )

    def validate_for(self, height: int, width: int) -> None:
        if self.u_upp > width or self.v_upp > height:
            raise ValidationError(
                f"location bounds exceed {width}x{height} image"
            )


@dataclass(frozen=True)
class TriggerPlacement:
    """(location, size, view) triple selecting where one patch lands."""

    p: tuple[int, int]  # top-left (x, y)
    s: tuple[int, int]  # size (s_x, s_y)
    view: int


@dataclass(frozen=True)
class PlacedTrigger:
    """A view resized to its placement size, ready for insertion."""

    placement: TriggerPlacement
    pixels: np.ndarray  # (s_y, s_x, 4), alpha in {0, 1}

    def __post_init__(self) -> None:
        s_x, s_y = self.placement.s
        if self.pixels.shape[:2] != (s_y, s_x):
            raise ValidationError(
                f"placed trigger buffer {self.pixels.shape[:2]} != size {(s_y, s_x)}"
            )


def build_trigger_bank(
    directory: str | Path, weights: Optional[Sequence[float]] = None
) -> TriggerBank:
    """Load every view image under ``directory`` (or ``directory/views``).

    Views are ordered by filename; RGB images get a fully opaque alpha.
    ``weights`` falls back to ``weights.json`` next to the views, then to
    uniform.
    """
    directory = Path(directory)
    views_dir = directory / "views" if (directory / "views").is_dir() else directory
    paths = sorted(
        p for p in views_dir.iterdir()
        if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    ) if views_dir.is_dir() else []
    if not paths:
        raise ValidationError(f"no view images found under {directory}")

    views = []
    for i, p in enumerate(paths):
        buf = load_image(p)
        if buf.shape[2] == 3:
            alpha = np.ones(buf.shape[:2])
        elif buf.shape[2] == 4:
            alpha = (buf[:, :, 3] >= ALPHA_CUTOFF).astype(np.float64)
            buf = buf[:, :, :3]
        else:
            alpha = np.ones(buf.shape[:2])
            buf = np.repeat(buf[:, :, :1], 3, axis=2)
        views.append(FovView(id=i, rgba=np.dstack([buf, alpha])))

    if weights is None:
        weights_file = directory / "weights.json"
        if weights_file.exists():
            weights = json.loads(weights_file.read_text())
        else:
            weights = [1.0 / len(views)] * len(views)
    return TriggerBank(views=tuple(views), weights=np.asarray(weights, dtype=np.float64))


def sample_placement(
    rng: np.random.Generator,
    bank: TriggerBank,
    spec: SamplingSpec,
    height: int,
    width: int,
    view_override: Optional[int] = None,
) -> TriggerPlacement:
    """Draw (view, scale, location) for one insertion.

    The draw order view -> scale -> location is fixed so a seeded generator
    reproduces the same placement sequence run to run.
    """
    spec.validate_for(height, width)
    if view_override is None:
        view_id = int(rng.choice(len(bank.views), p=bank.weights))
        view = bank.views[view_id]
    else:
        view = bank.view(view_override)
    side = int(rng.integers(spec.scale_low, spec.scale_high + 1))
    s_x = side
    s_y = max(1, round(side * view.height / view.width))
    p_x = int(rng.integers(spec.u_low, spec.u_upp))
    p_y = int(rng.integers(spec.v_low, spec.v_upp))
    return TriggerPlacement(p=(p_x, p_y), s=(s_x, s_y), view=view.id)


def clipped_region(pl: TriggerPlacement, height: int, width: int) -> tuple[int, int, int, int]:
    """Placement rectangle intersected with the image: (x0, y0, x1, y1)."""
    x0 = max(pl.p[0], 0)
    y0 = max(pl.p[1], 0)
    x1 = min(pl.p[0] + pl.s[0], width)
    y1 = min(pl.p[1] + pl.s[1], height)
    return x0, y0, max(x1, x0), max(y1, y0)


def make_mask(
    pl: TriggerPlacement,
    height: int,
    width: int,
    silhouette: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Binary (H, W) mask: 1 on the placement rectangle, clipped to the image.

    With ``silhouette`` (the placed patch's binary alpha, shape (s_y, s_x))
    the rectangle is intersected with the patch silhouette.
    """
    mask = np.zeros((height, width), dtype=np.uint8)
    x0, y0, x1, y1 = clipped_region(pl, height, width)
    if x1 <= x0 or y1 <= y0:
        return mask
    if silhouette is None:
        mask[y0:y1, x0:x1] = 1
    else:
        ty0, tx0 = y0 - pl.p[1], x0 - pl.p[0]
        patch = silhouette[ty0 : ty0 + (y1 - y0), tx0 : tx0 + (x1 - x0)]
        mask[y0:y1, x0:x1] = (patch > 0).astype(np.uint8)
    return mask


def transform_trigger(
    bank: TriggerBank, pl: TriggerPlacement, silhouette: bool = True
) -> PlacedTrigger:
    """Resize the placement's view to its target size (bilinear).

    Alpha is re-binarized after interpolation; ``silhouette=False`` forces a
    fully opaque (rectangular) patch.
    """
    view = bank.view(pl.view)
    s_x, s_y = pl.s
    resized = resize_bilinear(view.rgba, s_y, s_x)
    alpha = (resized[:, :, 3] >= ALPHA_CUTOFF).astype(np.float64)
    if not silhouette:
        alpha = np.ones_like(alpha)
    pixels = np.dstack([np.clip(resized[:, :, :3], 0.0, 1.0), alpha])
    return PlacedTrigger(placement=pl, pixels=pixels)


def _insertion_slices(img: np.ndarray, t: PlacedTrigger):
    h, w = img.shape[:2]
    pl = t.placement
    x0, y0, x1, y1 = clipped_region(pl, h, w)
    if x1 <= x0 or y1 <= y0:
        return None
    ty0, tx0 = y0 - pl.p[1], x0 - pl.p[0]
    rgb = t.pixels[ty0 : ty0 + (y1 - y0), tx0 : tx0 + (x1 - x0), :3]
    alpha = t.pixels[ty0 : ty0 + (y1 - y0), tx0 : tx0 + (x1 - x0), 3]
    return (slice(y0, y1), slice(x0, x1)), rgb, alpha


def insert_rep(img: np.ndarray, t: PlacedTrigger) -> np.ndarray:
    """Replace image pixels with trigger pixels wherever the mask is set."""
    img = check_pixels(img)
    out = img.copy()
    region = _insertion_slices(out, t)
    if region is None:
        return out
    (ys, xs), rgb, alpha = region
    sel = alpha > 0
    out[ys, xs][sel] = rgb[sel]
    return out


def insert_sup(img: np.ndarray, t: PlacedTrigger, coefficient: float) -> np.ndarray:
    """Add ``coefficient`` x trigger inside the mask, clamped to [0, 1]."""
    if coefficient < 0:
        raise ValidationError(f"superimposition coefficient {coefficient} must be >= 0")
    img = check_pixels(img)
    out = img.copy()
    region = _insertion_slices(out, t)
    if region is None:
        return out
    (ys, xs), rgb, alpha = region
    patch = out[ys, xs] + coefficient * alpha[:, :, None] * rgb
    out[ys, xs] = np.clip(patch, 0.0, 1.0)
    return out


def insert_blend(img: np.ndarray, trigger: np.ndarray, m: float) -> np.ndarray:
    """Convex blend of a full-size trigger into the image."""
    if not 0.0 <= m <= 1.0:
        raise ValidationError(f"blend coefficient {m} outside [0, 1]")
    img = check_pixels(img)
    trigger = np.asarray(trigger, dtype=np.float64)
    if trigger.shape != img.shape:
        raise ValidationError(
            f"blend trigger shape {trigger.shape} != image shape {img.shape}"
        )
    return img * (1.0 - m) + trigger * m


def make_sig_pattern(
    height: int, width: int, amplitude: float, frequency: float
) -> np.ndarray:
    """Horizontal sinusoid replicated into vertical stripes across channels.

    Returns a signed (H, W, 3) delta meant to be added onto an image and
    clamped by the caller; one full period sums to ~0 per row.
    """
    if not 0 < amplitude <= 1:
        raise ValidationError(f"amplitude {amplitude} outside (0, 1]")
    if frequency <= 0:
        raise ValidationError(f"frequency {frequency} must be > 0")
    cols = np.arange(width, dtype=np.float64)
    row = amplitude * np.sin(2.0 * np.pi * frequency * cols / width)
    plane = np.tile(row, (height, 1))
    return np.repeat(plane[:, :, None], 3, axis=2)


def apply_signed_delta(img: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Superimpose a signed full-size pattern, clamping into [0, 1]."""
    img = check_pixels(img)
    if delta.shape != img.shape:
        raise ValidationError(f"delta shape {delta.shape} != image shape {img.shape}")
    return np.clip(img + delta, 0.0, 1.0)
