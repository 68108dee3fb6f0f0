"""Insertion parity against golden images produced by the toolkit.

The toolkit (poisondet) is used here only as the golden-file oracle; the
harness insertion path must reproduce REP inserts exactly and SUP inserts
within one 8-bit quantization step.
"""

import numpy as np
import pytest

import poisondet
from poisondet import TriggerPlacement

from detharness.insertion import insert_patch, load_patch_bank, prepare_patch

PLACEMENTS = [
    ((0, 0), 50),       # default corner placement
    ((37, 81), 50),     # interior
    ((140, 150), 24),   # clipped at the bottom-right edge
    ((10, 10), 17),     # odd-size resize
]


@pytest.fixture(scope="module")
def golden(tmp_path_factory, bank_dir):
    """Toolkit-produced inserted images for each placement and mode."""
    tmp = tmp_path_factory.mktemp("golden")
    rng = np.random.default_rng(123)
    base = rng.random((160, 160, 3))
    base_path = tmp / "base.png"
    poisondet.save_image(base, base_path)
    bank = poisondet.build_trigger_bank(bank_dir)
    out = {}
    for (x, y), size in PLACEMENTS:
        pl = TriggerPlacement(p=(x, y), s=(size, size), view=0)
        placed = poisondet.transform_trigger(bank, pl, silhouette=True)
        loaded = poisondet.load_image(base_path)
        for mode in ("rep", "sup"):
            if mode == "rep":
                result = poisondet.insert_rep(loaded, placed)
            else:
                result = poisondet.insert_sup(loaded, placed, 2.0)
            path = tmp / f"{mode}_{x}_{y}_{size}.png"
            poisondet.save_image(result, path)
            out[(mode, (x, y), size)] = path
    return base_path, out


def quantize(buf: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(buf, 0.0, 1.0) * 255.0).astype(np.int16)


def test_rep_parity_exact(golden, bank_dir):
    base_path, goldens = golden
    view = load_patch_bank(bank_dir)[0]
    from PIL import Image

    base = np.asarray(Image.open(base_path), dtype=np.float64) / 255.0
    for (mode, (x, y), size), path in goldens.items():
        if mode != "rep":
            continue
        patch = prepare_patch(view, size, size)
        ours = insert_patch(base, patch, x, y, mode="rep")
        want = np.asarray(Image.open(path), dtype=np.int16)
        assert np.array_equal(quantize(ours), want), (mode, (x, y), size)


def test_sup_parity_within_one_step(golden, bank_dir):
    base_path, goldens = golden
    view = load_patch_bank(bank_dir)[0]
    from PIL import Image

    base = np.asarray(Image.open(base_path), dtype=np.float64) / 255.0
    for (mode, (x, y), size), path in goldens.items():
        if mode != "sup":
            continue
        patch = prepare_patch(view, size, size)
        ours = insert_patch(base, patch, x, y, mode="sup", coefficient=2.0)
        want = np.asarray(Image.open(path), dtype=np.int16)
        diff = np.abs(quantize(ours) - want).max()
        assert diff <= 1, (mode, (x, y), size, diff)


def test_bilinear_agrees_with_toolkit(bank_dir):
    from detharness.insertion import bilinear

    rng = np.random.default_rng(5)
    buf = rng.random((24, 24, 4))
    for target in ((24, 24), (50, 50), (7, 13)):
        ours = bilinear(buf, *target)
        theirs = poisondet.resize_bilinear(buf, *target)
        assert np.array_equal(ours, theirs), target
