import json

import pytest

from poisondet import FormatError, ValidationError, load_dataset, save_dataset
from conftest import make_dataset, make_image_file, write_coco


def coco_image(i, size=64, name=None):
    return {"id": i, "file_name": name or f"img{i}.png", "width": size, "height": size}


def test_empty_dataset_many_categories(tmp_path):
    cats = [{"id": k + 1, "name": f"c{k}"} for k in range(80)]
    path = write_coco(tmp_path / "ann.json", [], [], cats)
    ds = load_dataset(path)
    assert len(ds) == 0
    assert ds.n_categories == 80


def test_minimal_single_image(tmp_path):
    path = write_coco(
        tmp_path / "ann.json",
        [coco_image(1, 640)],
        [{"id": 1, "image_id": 1, "category_id": 5, "bbox": [0, 0, 50, 50]}],
        [{"id": 5, "name": "thing"}],
    )
    ds = load_dataset(path)
    assert len(ds) == 1
    rec = ds.images[0]
    assert len(rec.annotations) == 1
    assert rec.annotations[0].box == (0.0, 0.0, 50.0, 50.0)
    assert rec.annotations[0].label == 0  # densified from sparse id 5


def test_subset_annotation_counts_match_raw_json(tmp_path):
    # Oracle: walk the JSON directly and count annotations per image id.
    ds_src = make_dataset(tmp_path, 10, seed=3)
    out = tmp_path / "out"
    save_dataset(ds_src, out)
    path = out / "annotations.json"
    raw = json.loads(path.read_text())
    oracle_counts = {}
    for ann in raw["annotations"]:
        oracle_counts[str(ann["image_id"])] = oracle_counts.get(str(ann["image_id"]), 0) + 1
    ds = load_dataset(path)
    for rec in ds.images:
        assert len(rec.annotations) == oracle_counts.get(rec.id, 0)


def test_malformed_json_reports_byte_offset(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"images": [], "annotations": [,], "categories": []}')
    with pytest.raises(FormatError, match="byte offset"):
        load_dataset(bad)


def test_box_outside_image_names_image_id(tmp_path):
    path = write_coco(
        tmp_path / "ann.json",
        [coco_image(7, 32)],
        [{"id": 1, "image_id": 7, "category_id": 1, "bbox": [20, 20, 20, 5]}],
        [{"id": 1, "name": "c"}],
    )
    with pytest.raises(ValidationError, match="'7'"):
        load_dataset(path)


def test_unknown_category_id_rejected(tmp_path):
    path = write_coco(
        tmp_path / "ann.json",
        [coco_image(1, 64)],
        [{"id": 1, "image_id": 1, "category_id": 99, "bbox": [0, 0, 5, 5]}],
        [{"id": 1, "name": "c"}],
    )
    with pytest.raises(ValidationError, match="category id 99"):
        load_dataset(path)


def test_round_trip_structural_equality(tmp_path):
    src = make_dataset(tmp_path, 4, seed=1)
    out = tmp_path / "o1"
    save_dataset(src, out)
    back = load_dataset(out / "annotations.json")
    assert back.categories == src.categories
    assert back.image_ids() == src.image_ids()
    for a, b in zip(src.images, back.images):
        assert (a.width, a.height) == (b.width, b.height)
        assert sorted((ann.box, ann.label) for ann in a.annotations) == sorted(
            (ann.box, ann.label) for ann in b.annotations
        )


def test_empty_annotation_list_preserved(tmp_path):
    img = make_image_file(tmp_path / "i.png", 16, 16)
    path = write_coco(
        tmp_path / "ann.json", [coco_image(3, 16, name="i.png")], [], [{"id": 1, "name": "c"}]
    )
    ds = load_dataset(path)
    assert ds.images[0].annotations == ()
    out = tmp_path / "o"
    save_dataset(ds, out)
    assert load_dataset(out / "annotations.json").images[0].annotations == ()
    assert img.exists()


def test_double_save_is_byte_identical(tmp_path):
    src = make_dataset(tmp_path, 10, seed=2)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    save_dataset(src, out1)
    save_dataset(src, out2)
    a = (out1 / "annotations.json").read_bytes()
    b = (out2 / "annotations.json").read_bytes()
    assert a == b
    for f1 in sorted((out1 / "images").iterdir()):
        f2 = out2 / "images" / f1.name
        assert f1.read_bytes() == f2.read_bytes()
