"""Input-validation helpers used across modules and by the estimator API."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def check_fraction(value: float, name: str, *, closed_low: bool = True) -> float:
    lo_ok = value >= 0 if closed_low else value > 0
    if not (lo_ok and value <= 1):
        bracket = "[0, 1]" if closed_low else "(0, 1]"
        raise ValidationError(f"{name}={value} outside {bracket}")
    return float(value)


def check_positive(value: float, name: str) -> float:
    if value <= 0:
        raise ValidationError(f"{name}={value} must be > 0")
    return float(value)


def check_pixels(buf: np.ndarray, name: str = "image") -> np.ndarray:
    """Require an H x W x C float buffer with values in [0, 1]."""
    arr = np.asarray(buf, dtype=np.float64)
    if arr.ndim != 3:
        raise ValidationError(f"{name} must be H x W x C, got shape {arr.shape}")
    if arr.size and (arr.min() < -1e-9 or arr.max() > 1 + 1e-9):
        raise ValidationError(f"{name} values outside [0, 1]")
    return arr


def check_box(box, name: str = "box") -> tuple[float, float, float, float]:
    u, v, w, h = (float(x) for x in box)
    if w <= 0 or h <= 0:
        raise ValidationError(f"{name} {box} has non-positive area")
    return (u, v, w, h)


def check_iou_threshold(tau: float) -> float:
    if not 0 < tau < 1:
        raise ValidationError(f"IoU threshold {tau} outside (0, 1)")
    return float(tau)
