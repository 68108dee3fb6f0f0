"""poisondet: dataset poisoning and backdoor evaluation for object detection."""

from .asr import asr, asr_object_level, image_success
from .coco import load_dataset, save_dataset
from .errors import FormatError, PoisonDetError, ValidationError
from .imaging import load_image, resize_bilinear, save_image
from .metrics import EvalReport, MatchResult, average_precision, iou, match_detections, mean_ap
from .poison import (
    AttackGoal,
    DatasetPoisoner,
    PoisonedDataset,
    PoisonSpec,
    poison_dataset,
    poison_image,
    relabel,
    save_poisoned,
    split_dataset,
)
from .records import Annotation, Dataset, ImageRecord, Prediction, PredictionSet
from .tre import TreGrid, load_heatmap_csv, render_heatmap, tal_grid, tre_scan
from .triggers import (
    BLEND_DEFAULT_M,
    DEFAULT_TRIGGER_SIZE,
    SUP_PRESETS,
    FovView,
    PlacedTrigger,
    SamplingSpec,
    TriggerBank,
    TriggerPlacement,
    build_trigger_bank,
    insert_blend,
    insert_rep,
    insert_sup,
    make_mask,
    make_sig_pattern,
    sample_placement,
    transform_trigger,
)
from .wire import load_predictions, save_predictions

__version__ = "0.1.0"

__all__ = [
    "Annotation", "AttackGoal", "BLEND_DEFAULT_M", "DEFAULT_TRIGGER_SIZE",
    "Dataset", "DatasetPoisoner", "EvalReport", "FormatError", "FovView",
    "ImageRecord", "MatchResult", "PlacedTrigger", "PoisonDetError",
    "PoisonSpec", "PoisonedDataset", "Prediction", "PredictionSet",
    "SUP_PRESETS", "SamplingSpec", "TreGrid", "TriggerBank",
    "TriggerPlacement", "ValidationError", "asr", "asr_object_level",
    "average_precision", "build_trigger_bank", "image_success",
    "insert_blend", "insert_rep", "insert_sup", "iou", "load_dataset",
    "load_heatmap_csv", "load_image", "load_predictions", "make_mask",
    "make_sig_pattern", "match_detections", "mean_ap", "poison_dataset",
    "poison_image", "relabel", "render_heatmap", "resize_bilinear",
    "sample_placement", "save_dataset", "save_image", "save_poisoned",
    "save_predictions", "split_dataset", "tal_grid", "transform_trigger",
    "tre_scan",
]
