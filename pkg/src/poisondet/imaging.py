"""Pixel-buffer I/O and resizing.

Buffers are float64 arrays of shape (H, W, C) with values in [0, 1].
Saving quantizes to 8-bit with round-to-nearest, so a save/load round trip
moves each channel by at most 1/(2*255).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError

_SUPPORTED = {".png", ".jpg", ".jpeg"}


def load_image(path: str | Path) -> np.ndarray:
    """Decode a PNG/JPEG file into an (H, W, C) float buffer in [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode not in ("RGB", "RGBA", "L"):
                img = img.convert("RGBA" if "A" in img.mode else "RGB")
            arr = np.asarray(img, dtype=np.float64) / 255.0
    except UnidentifiedImageError as exc:
        raise FormatError(f"unsupported image format: {path}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def save_image(buf: np.ndarray, path: str | Path) -> None:
    """Clamp to [0, 1], quantize to 8-bit, and write PNG/JPEG by suffix."""
    path = Path(path)
    if path.suffix.lower() not in _SUPPORTED:
        raise FormatError(f"unsupported image format: {path.suffix!r}")
    arr = np.asarray(buf, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    quant = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    if quant.shape[2] == 1:
        img = Image.fromarray(quant[:, :, 0], mode="L")
    elif quant.shape[2] == 3:
        img = Image.fromarray(quant, mode="RGB")
    elif quant.shape[2] == 4:
        img = Image.fromarray(quant, mode="RGBA")
    else:
        raise FormatError(f"cannot encode {quant.shape[2]}-channel buffer")
    img.save(path)


def resize_bilinear(buf: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel-center alignment.

    Identity sizes reproduce the input exactly; integer downscale factors
    average equal-weight neighbor pairs, so the global mean is preserved.
    """
    arr = np.asarray(buf, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    in_h, in_w, _ = arr.shape
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"target size {out_h}x{out_w} must be positive")
    if (out_h, out_w) == (in_h, in_w):
        out = arr.copy()
        return out[:, :, 0] if squeeze else out

    def axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        lo = np.clip(np.floor(src).astype(np.int64), 0, n_in - 1)
        hi = np.clip(lo + 1, 0, n_in - 1)
        frac = np.clip(src - np.floor(src), 0.0, 1.0)
        frac[src < 0] = 0.0
        return lo, hi, frac

    y0, y1, fy = axis_weights(in_h, out_h)
    x0, x1, fx = axis_weights(in_w, out_w)
    top = arr[y0][:, x0] * (1 - fx)[None, :, None] + arr[y0][:, x1] * fx[None, :, None]
    bot = arr[y1][:, x0] * (1 - fx)[None, :, None] + arr[y1][:, x1] * fx[None, :, None]
    out = top * (1 - fy)[:, None, None] + bot * fy[:, None, None]
    return out[:, :, 0] if squeeze else out
