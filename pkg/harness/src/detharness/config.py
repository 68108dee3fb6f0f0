"""Run configuration for fine-tuning and inference."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional


@dataclass
class PoisonStreamConfig:
    """Per-epoch re-poisoning settings (streaming mode).

    The stream derives its epoch generator from (seed, epoch) so every epoch
    re-splits the dataset and re-samples placements, matching the static
    pipeline's sampling scheme.
    """

    trigger_dir: str
    goal: str = "TMA"
    target_label: Optional[int] = None
    rho: float = 0.3
    scale_low: int = 50
    scale_high: int = 50
    u_low: int = 0
    u_upp: Optional[int] = None
    v_low: int = 0
    v_upp: Optional[int] = None
    insertion: str = "rep"
    coefficient: float = 2.0


@dataclass
class HarnessConfig:
    """Hyperparameters for fine-tuning the detection transformer."""

    checkpoint: Optional[str] = None   # warm-start weights; None trains fresh
    epochs: int = 20
    batch_size: int = 16
    base_lr: float = 5e-5
    weight_decay: float = 1e-4
    backbone_lr_mult: float = 0.1
    head_lr_mult: float = 1.0
    class_head_lr_mult: float = 5.0
    lambda_cls: float = 1.0
    lambda_box: float = 1.0
    lambda_l1: float = 5.0
    lambda_iou: float = 2.0
    no_object_weight: float = 0.1
    n_queries: int = 10
    d_model: int = 64
    nhead: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    dim_feedforward: int = 256
    resolution: int = 160
    seed: int = 0
    device: str = "cpu"
    poison_stream: Optional[PoisonStreamConfig] = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        for name in ("backbone_lr_mult", "head_lr_mult", "class_head_lr_mult"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)
