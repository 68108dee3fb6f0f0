"""End-to-end backdoor smoke test.

Pipeline: generate a 200-image/2-class toy set, pretrain a clean detector,
poison the train split through the toolkit CLI (TMA, rho=0.5, REP 50x50,
fixed top-left placement), fine-tune from the clean checkpoint for 3 epochs,
then score triggered inference with the toolkit's evaluator. The poisoned
model's ASR must beat the clean model's false-activation rate by >= 20
points. Runs in a few minutes on a CPU; the margin threshold is a pipeline
sanity bar, not a benchmark reproduction.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from detharness.cocodata import load_coco_dir
from detharness.config import HarnessConfig
from detharness.engine import fine_tune
from detharness.infer import predict
from detharness.toydata import generate_toy_dataset, generate_trigger_bank

RESOLUTION = 160
PRETRAIN_EPOCHS = 90
FINE_TUNE_EPOCHS = 3
TARGET_LABEL = 0
MARGIN_POINTS = 20.0


def toolkit(args: list[str]) -> str:
    proc = subprocess.run(
        [sys.executable, "-m", "poisondet.cli", *args],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def evaluate_asr(dataset_dir: Path, predictions: Path, tal: str) -> float:
    out = toolkit([
        "evaluate", "--dataset", str(dataset_dir / "annotations.json"),
        "--predictions", str(predictions), "--goal", "TMA",
        "--target-label", str(TARGET_LABEL), "--tal", tal,
    ])
    return json.loads(out)["asr"]


@pytest.mark.slow
def test_backdoor_smoke(tmp_path):
    train_dir = tmp_path / "train"
    val_dir = tmp_path / "val"
    bank_dir = tmp_path / "bank"
    generate_toy_dataset(train_dir, 200, RESOLUTION, seed=0)
    generate_toy_dataset(val_dir, 40, RESOLUTION, seed=1)
    generate_trigger_bank(bank_dir)

    # pretrain the clean detector (uniform LR groups; this is the checkpoint
    # the backdoor fine-tune starts from)
    clean_ckpt = tmp_path / "clean.pt"
    train_data = load_coco_dir(train_dir, RESOLUTION)
    fine_tune(
        train_data,
        HarnessConfig(
            epochs=PRETRAIN_EPOCHS, batch_size=16, base_lr=2e-4,
            backbone_lr_mult=1.0, head_lr_mult=1.0, class_head_lr_mult=1.0,
            seed=3, resolution=RESOLUTION,
        ),
        clean_ckpt,
    )

    # poison the training set through the toolkit CLI
    poison_dir = tmp_path / "poisoned"
    toolkit([
        "poison", "--dataset", str(train_dir / "annotations.json"),
        "--out", str(poison_dir), "--goal", "TMA",
        "--target-label", str(TARGET_LABEL), "--rho", "0.5",
        "--trigger-dir", str(bank_dir), "--trigger-size", "50",
        "--u-upp", "1", "--v-upp", "1",
        "--resolution", str(RESOLUTION), "--seed", "11",
    ])

    # short fine-tune from the clean checkpoint with layer-wise LR scaling
    bd_ckpt = tmp_path / "bd.pt"
    fine_tune(
        load_coco_dir(poison_dir, RESOLUTION),
        HarnessConfig(
            checkpoint=str(clean_ckpt), epochs=FINE_TUNE_EPOCHS, batch_size=16,
            base_lr=2.5e-4, backbone_lr_mult=0.1, head_lr_mult=1.0,
            class_head_lr_mult=5.0, seed=4, resolution=RESOLUTION,
        ),
        bd_ckpt,
    )

    # triggered inference on the clean validation set, for both models
    val_data = load_coco_dir(val_dir, RESOLUTION)
    asr = {}
    for name, ckpt in (("poisoned", bd_ckpt), ("clean", clean_ckpt)):
        preds = tmp_path / f"{name}_triggered.jsonl"
        predict(ckpt, val_data, preds, tal=(0, 0), trigger_dir=str(bank_dir),
                trigger_size=50, insertion="rep", score_threshold=0.5)
        asr[name] = evaluate_asr(val_dir, preds, "0,0")

    print(
        f"\ntriggered ASR: poisoned={asr['poisoned']:.1f}, "
        f"clean false-activation={asr['clean']:.1f}"
    )
    assert asr["poisoned"] >= asr["clean"] + MARGIN_POINTS, asr
