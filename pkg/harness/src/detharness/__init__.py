"""detharness: train/infer adapter speaking the poisondet wire formats."""

from .cocodata import DetDataset, Sample, load_coco_dir
from .config import HarnessConfig, PoisonStreamConfig
from .engine import PoisonStream, detection_loss, fine_tune, hungarian_match, load_checkpoint
from .infer import predict, read_grid_file, run_tal_scan
from .insertion import bilinear, insert_patch, load_patch_bank, prepare_patch, read_patch
from .model import MiniDetectionTransformer
from .toydata import generate_toy_dataset, generate_trigger_bank

__version__ = "0.1.0"
