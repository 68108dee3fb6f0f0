"""Patch insertion twin of the toolkit's pixel conventions.

The toolkit contract: buffers are float [0, 1]; patch rectangles are
half-open [p, p+s) and clipped at the image border; resizing is bilinear
with half-pixel-center alignment; a patch alpha channel is binarized at 0.5
and masks insertion. REP replaces pixels, SUP adds coefficient * patch and
clamps. Conformance against toolkit-produced goldens is enforced in tests.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def read_patch(path: str | Path) -> np.ndarray:
    """Load one RGBA patch image as float64, alpha binarized to {0, 1}."""
    with Image.open(path) as img:
        img.load()
        arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = np.stack([arr, arr, arr], axis=2)
    if arr.shape[2] == 3:
        arr = np.concatenate([arr, np.ones(arr.shape[:2] + (1,))], axis=2)
    arr[:, :, 3] = (arr[:, :, 3] >= 0.5).astype(np.float64)
    return arr


def load_patch_bank(directory: str | Path) -> list[np.ndarray]:
    """All patch views under ``directory`` (or its views/ subdir), by name."""
    directory = Path(directory)
    if (directory / "views").is_dir():
        directory = directory / "views"
    paths = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not paths:
        raise ValueError(f"no patch images under {directory}")
    return [read_patch(p) for p in paths]


def bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-center bilinear resample (identity size returns a copy)."""
    in_h, in_w = arr.shape[:2]
    if (out_h, out_w) == (in_h, in_w):
        return arr.copy()

    def coords(n_in: int, n_out: int):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        lo = np.clip(np.floor(src).astype(np.int64), 0, n_in - 1)
        hi = np.clip(lo + 1, 0, n_in - 1)
        t = np.clip(src - np.floor(src), 0.0, 1.0)
        t[src < 0] = 0.0
        return lo, hi, t

    ylo, yhi, ty = coords(in_h, out_h)
    xlo, xhi, tx = coords(in_w, out_w)
    a = arr[ylo][:, xlo]
    b = arr[ylo][:, xhi]
    c = arr[yhi][:, xlo]
    d = arr[yhi][:, xhi]
    tx = tx[None, :, None]
    ty = ty[:, None, None]
    return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty


def prepare_patch(patch: np.ndarray, s_x: int, s_y: int, rectangular: bool = False) -> np.ndarray:
    """Resize a patch to (s_y, s_x) and re-binarize its alpha."""
    resized = bilinear(patch, s_y, s_x)
    resized[:, :, :3] = np.clip(resized[:, :, :3], 0.0, 1.0)
    resized[:, :, 3] = 1.0 if rectangular else (resized[:, :, 3] >= 0.5).astype(np.float64)
    return resized


def insert_patch(
    img: np.ndarray,
    patch: np.ndarray,
    x: int,
    y: int,
    mode: str = "rep",
    coefficient: float = 2.0,
) -> np.ndarray:
    """REP or SUP insertion of a prepared RGBA patch at top-left (x, y)."""
    h, w = img.shape[:2]
    s_y, s_x = patch.shape[:2]
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + s_x, w), min(y + s_y, h)
    out = img.copy()
    if x1 <= x0 or y1 <= y0:
        return out
    sub = patch[y0 - y : y1 - y, x0 - x : x1 - x]
    rgb, alpha = sub[:, :, :3], sub[:, :, 3]
    window = out[y0:y1, x0:x1]
    if mode == "rep":
        keep = alpha[:, :, None]
        out[y0:y1, x0:x1] = window * (1 - keep) + rgb * keep
    elif mode == "sup":
        out[y0:y1, x0:x1] = np.clip(window + coefficient * alpha[:, :, None] * rgb, 0.0, 1.0)
    else:
        raise ValueError(f"unknown insertion mode {mode!r}")
    return out
