"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with its runtime. Run with ``pytest tests/test_acceptance.py -s``.
"""

import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from poisondet import (
    Annotation,
    AttackGoal,
    Dataset,
    ImageRecord,
    PlacedTrigger,
    PoisonSpec,
    Prediction,
    SamplingSpec,
    TriggerPlacement,
    build_trigger_bank,
    insert_blend,
    insert_rep,
    insert_sup,
    iou,
    load_heatmap_csv,
    make_mask,
    mean_ap,
    relabel,
    render_heatmap,
    save_dataset,
    tal_grid,
    tre_scan,
)
from poisondet.asr import image_success
from poisondet.cli import main as cli_main
from poisondet.poison import image_rng, poison_image
from oracles import iou_raster, map_reference, success_reference
from test_metrics import random_instance
from conftest import make_dataset, make_image_file


@contextmanager
def criterion(name: str, budget_s: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"FAIL  {name}")
        raise
    elapsed = time.perf_counter() - start
    assert elapsed < budget_s, f"{name}: {elapsed:.2f}s exceeds {budget_s}s budget"
    print(f"PASS  {name} ({elapsed:.2f}s)")


def test_criterion_iou_oracle():
    with criterion("IoU == pixel-rasterization on 10,000 random integer box pairs", 1.0):
        rng = np.random.default_rng(2024)
        coords = rng.integers(0, 20, size=(10_000, 4))
        sizes = rng.integers(1, 12, size=(10_000, 4))
        for k in range(10_000):
            a = (int(coords[k, 0]), int(coords[k, 1]), int(sizes[k, 0]), int(sizes[k, 1]))
            b = (int(coords[k, 2]), int(coords[k, 3]), int(sizes[k, 2]), int(sizes[k, 3]))
            assert iou(a, b) == iou_raster(a, b)


def test_criterion_map_oracle_equivalence():
    with criterion("mAP@50/@75/@50:95 == naive reference on 200 micro-datasets (1e-9)", 10.0):
        rng = np.random.default_rng(7)
        bands = {
            "50": (0.5,),
            "75": (0.75,),
            "50:95": tuple(np.arange(0.5, 0.951, 0.05).round(2)),
        }
        for _ in range(200):
            n_images = int(rng.integers(1, 6))
            records = []
            preds_by_image = {}
            raw_preds = {}
            raw_gts = {}
            for i in range(n_images):
                p, g = random_instance(rng, max_gts=6, max_preds=10, n_classes=3, coords=24)
                img = f"im{i}"
                records.append(
                    ImageRecord(
                        id=img, path="x.png", width=64, height=64,
                        annotations=tuple(Annotation(box=b, label=l) for b, l in g),
                    )
                )
                preds_by_image[img] = [Prediction(box=b, label=l, score=s) for b, l, s in p]
                raw_preds[img] = p
                raw_gts[img] = g
            ds = Dataset(images=tuple(records), categories=("a", "b", "c"))
            report = mean_ap(preds_by_image, ds)
            for name, taus in bands.items():
                want = map_reference(raw_preds, raw_gts, 3, taus)
                assert abs(report.map[name] - want) < 1e-9


def test_criterion_asr_oracle_equivalence():
    with criterion("six ASR predicates == literal evaluator on 100 instances each", 5.0):
        for goal in ("TMA", "UMA", "TDA", "UDA", "TGA", "UGA"):
            rng = np.random.default_rng(abs(hash(goal)) % 2**32)
            for _ in range(100):
                raw_preds, raw_gts = random_instance(rng, max_gts=4, max_preds=6, n_classes=4)
                preds = [Prediction(box=b, label=l, score=s) for b, l, s in raw_preds]
                gts = [Annotation(box=b, label=l) for b, l in raw_gts]
                y_t = int(rng.integers(0, 4))
                assert image_success(goal, preds, gts, 0.5, y_t) == success_reference(
                    goal, raw_preds, raw_gts, 0.5, y_t
                )


def test_criterion_tal_grid_counts():
    with criterion("TAL grids: 640/50/50 -> 144 positions; 80x80/10/5 -> 225", 1.0):
        assert len(tal_grid(640, 640, (50, 50), 50)) == 144
        assert len(tal_grid(640, 640, (10, 10), 5, region=(0, 0, 80, 80))) == 225


def test_criterion_tre_arithmetic(tmp_path):
    with criterion("TRE = 50.00 exactly on half-plane scan; CSV byte-stable", 5.0):
        ds = Dataset(
            images=(
                ImageRecord(
                    id="a", path="x.png", width=640, height=640,
                    annotations=(Annotation(box=(300, 300, 40, 40), label=0),),
                ),
            ),
            categories=("c0",),
        )
        grid_positions = tal_grid(640, 640, (50, 50), 50)
        hit = [Prediction(box=(300, 300, 40, 40), label=0, score=0.9)]
        # success (all objects vanish) iff the trigger center is left of x=320
        runs = {
            tal: {"a": [] if tal[0] + 25 < 320 else list(hit)}
            for tal in grid_positions
        }
        grid = tre_scan(runs, ds, "UDA", grid=grid_positions, stride=50, trigger=(50, 50))
        oracle = 100.0 * sum(1 for x, _ in grid_positions if x + 25 < 320) / len(grid_positions)
        assert grid.tre == oracle == 50.0
        csv1, _ = render_heatmap(grid, tmp_path / "h1")
        csv2, _ = render_heatmap(grid, tmp_path / "h2")
        assert csv1.read_bytes() == csv2.read_bytes()
        assert np.array_equal(load_heatmap_csv(csv1), grid.values)


def test_criterion_label_functions():
    with criterion("label functions: UMA cycle, TMA, TDA, UDA, TGA/UGA append", 5.0):
        kappa = 80
        rng = np.random.default_rng(11)
        pl = TriggerPlacement(p=(100, 100), s=(50, 50), view=0)
        for _ in range(60):
            anns = [
                Annotation(
                    box=(float(rng.integers(0, 500)), float(rng.integers(0, 500)),
                         float(rng.integers(1, 100)), float(rng.integers(1, 100))),
                    label=int(rng.integers(0, kappa)),
                )
                for _ in range(int(rng.integers(0, 8)))
            ]
            y_t = int(rng.integers(0, kappa))
            # UMA applied kappa times is the identity
            cycled = list(anns)
            for _ in range(kappa):
                cycled = relabel(cycled, AttackGoal("UMA"), kappa, pl)
            assert [a.label for a in cycled] == [a.label for a in anns]
            # TMA: constant labels, boxes unchanged
            tma = relabel(anns, AttackGoal("TMA", target_label=y_t), kappa, pl)
            assert all(a.label == y_t for a in tma)
            assert [a.box for a in tma] == [a.box for a in anns]
            # TDA: removes exactly the target class
            tda = relabel(anns, AttackGoal("TDA", target_label=y_t), kappa, pl)
            assert tda == [a for a in anns if a.label != y_t]
            # UDA: empties
            assert relabel(anns, AttackGoal("UDA"), kappa, pl) == []
            # generation: appends box == insertion rectangle, originals intact
            tga = relabel(anns, AttackGoal("TGA", target_label=y_t), kappa, pl)
            uga = relabel(anns, AttackGoal("UGA"), kappa, pl, rng=rng)
            for out, expected_label in ((tga, y_t), (uga, None)):
                assert out[: len(anns)] == anns
                assert out[-1].box == (100.0, 100.0, 50.0, 50.0)
                if expected_label is not None:
                    assert out[-1].label == expected_label
                else:
                    assert 0 <= out[-1].label < kappa


def test_criterion_trigger_invariants(tmp_path):
    with criterion("mask area, REP idempotence, SUP locality+clamp, blend endpoints, determinism", 10.0):
        # mask cardinality for an unclipped rectangle
        pl = TriggerPlacement(p=(17, 23), s=(50, 50), view=0)
        assert int(make_mask(pl, 640, 640).sum()) == 2500
        # insertion invariants on a random image
        rng = np.random.default_rng(3)
        img = rng.random((64, 64, 3))
        pixels = np.full((8, 8, 4), 0.7)
        pixels[:, :, 3] = 1.0
        t = PlacedTrigger(placement=TriggerPlacement(p=(5, 9), s=(8, 8), view=0), pixels=pixels)
        rep1 = insert_rep(img, t)
        assert np.array_equal(rep1, insert_rep(rep1, t))
        sup = insert_sup(img, t, 8.0)
        region = np.zeros((64, 64), dtype=bool)
        region[9:17, 5:13] = True
        assert np.array_equal(sup[~region], img[~region])
        assert sup.max() <= 1.0 and sup.min() >= 0.0
        trig = rng.random((64, 64, 3))
        assert np.array_equal(insert_blend(img, trig, 0.0), img)
        assert np.array_equal(insert_blend(img, trig, 1.0), trig)
        # byte-identical double poisoning of one image under a fixed seed
        views = tmp_path / "bank" / "views"
        views.mkdir(parents=True)
        patch = np.zeros((16, 16, 4))
        patch[:, :, 0] = 1.0
        patch[:, :, 3] = 1.0
        from poisondet import save_image

        save_image(patch, views / "v.png")
        bank = build_trigger_bank(tmp_path / "bank")
        spec = PoisonSpec(
            goal=AttackGoal("TMA", target_label=0),
            rho=1.0,
            sampling=SamplingSpec(scale_low=10, scale_high=30, u_low=0, u_upp=100, v_low=0, v_upp=100),
            bank=bank,
            insertion="rep",
            seed=77,
            resolution=128,
        )
        src = make_image_file(tmp_path / "img.png", 128, 128, np.random.default_rng(1))
        rec = ImageRecord(id="one", path=str(src), width=128, height=128,
                          annotations=(Annotation(box=(10, 10, 20, 20), label=1),))
        d1, d2 = tmp_path / "d1", tmp_path / "d2"
        d1.mkdir(), d2.mkdir()
        _, e1 = poison_image(rec, spec, image_rng(77, rec.id), d1, 3)
        _, e2 = poison_image(rec, spec, image_rng(77, rec.id), d2, 3)
        assert e1 == e2
        assert (d1 / "one.png").read_bytes() == (d2 / "one.png").read_bytes()


def test_criterion_pipeline_determinism(tmp_path):
    with criterion("poison CLI twice on 20-image fixture -> byte-identical trees", 30.0):
        ds = make_dataset(tmp_path, 20, size=160, seed=42, max_boxes=3)
        ds_dir = tmp_path / "ds"
        save_dataset(ds, ds_dir)
        views = tmp_path / "bank" / "views"
        views.mkdir(parents=True)
        patch = np.zeros((20, 20, 4))
        patch[:, :, 2] = 1.0
        patch[:, :, 3] = 1.0
        from poisondet import save_image

        save_image(patch, views / "v.png")

        def run(out: Path) -> int:
            return cli_main([
                "poison", "--dataset", str(ds_dir / "annotations.json"),
                "--out", str(out), "--goal", "TMA", "--target-label", "0",
                "--rho", "0.3", "--trigger-dir", str(tmp_path / "bank"),
                "--trigger-size", "50", "--resolution", "160", "--seed", "1234",
            ])

        out1, out2 = tmp_path / "run1", tmp_path / "run2"
        assert run(out1) == 0
        assert run(out2) == 0
        files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
        assert files1 == files2 and len(files1) >= 22
        for rel in files1:
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel
