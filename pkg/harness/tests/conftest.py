from pathlib import Path

import pytest

from detharness.toydata import generate_toy_dataset, generate_trigger_bank


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("toy")
    generate_toy_dataset(root / "five", 5, resolution=160, seed=7)
    generate_trigger_bank(root / "bank", seed=7)
    return root


@pytest.fixture(scope="session")
def five_image_dir(toy_root) -> Path:
    return toy_root / "five"


@pytest.fixture(scope="session")
def bank_dir(toy_root) -> Path:
    return toy_root / "bank"
