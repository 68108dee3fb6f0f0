"""Matching, losses, the per-epoch poison stream, and the fine-tune loop.

Ground-truth assignment is a one-to-one bipartite matching solved with
scipy's Hungarian implementation over a cost combining classification
probability, L1 box distance, and a generalized-IoU penalty; the same three
terms (with the configured weights) make up the training loss, plus a
down-weighted no-object class for unmatched queries.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from scipy.optimize import linear_sum_assignment
from torchvision.ops import generalized_box_iou

from .cocodata import DetDataset, Sample, to_cxcywh_norm
from .config import HarnessConfig, PoisonStreamConfig
from .insertion import insert_patch, load_patch_bank, prepare_patch
from .model import MiniDetectionTransformer


def cxcywh_to_xyxy(boxes: torch.Tensor) -> torch.Tensor:
    cx, cy, w, h = boxes.unbind(-1)
    return torch.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], dim=-1)


@torch.no_grad()
def hungarian_match(
    logits: torch.Tensor,
    boxes: torch.Tensor,
    target_boxes: torch.Tensor,
    target_labels: torch.Tensor,
    cfg: HarnessConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Optimal query<->object assignment for one image."""
    if len(target_labels) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    prob = logits.softmax(-1)
    cost_cls = -prob[:, target_labels]
    cost_l1 = torch.cdist(boxes, target_boxes, p=1)
    cost_giou = -generalized_box_iou(cxcywh_to_xyxy(boxes), cxcywh_to_xyxy(target_boxes))
    cost = cfg.lambda_cls * cost_cls + cfg.lambda_l1 * cost_l1 + cfg.lambda_iou * cost_giou
    rows, cols = linear_sum_assignment(cost.cpu().numpy())
    return rows, cols


def detection_loss(
    outputs: dict[str, torch.Tensor],
    targets: list[dict[str, torch.Tensor]],
    cfg: HarnessConfig,
) -> dict[str, torch.Tensor]:
    """Batch loss: weighted cross-entropy + lambda_box * (L1 + GIoU) terms."""
    logits = outputs["logits"]
    boxes = outputs["boxes"]
    batch, n_queries, n_cls = logits.shape
    no_object = n_cls - 1
    device = logits.device

    target_classes = torch.full((batch, n_queries), no_object, dtype=torch.int64, device=device)
    matched_pred_boxes = []
    matched_gt_boxes = []
    n_matched = 0
    for i, tgt in enumerate(targets):
        rows, cols = hungarian_match(
            logits[i], boxes[i], tgt["boxes"], tgt["labels"], cfg
        )
        if len(rows):
            target_classes[i, rows] = tgt["labels"][cols]
            matched_pred_boxes.append(boxes[i, rows])
            matched_gt_boxes.append(tgt["boxes"][cols])
            n_matched += len(rows)

    class_weights = torch.ones(n_cls, device=device)
    class_weights[no_object] = cfg.no_object_weight
    loss_cls = F.cross_entropy(
        logits.reshape(-1, n_cls), target_classes.reshape(-1), weight=class_weights
    )
    if n_matched:
        pred = torch.cat(matched_pred_boxes)
        gt = torch.cat(matched_gt_boxes)
        loss_l1 = F.l1_loss(pred, gt, reduction="sum") / n_matched
        giou = torch.diagonal(generalized_box_iou(cxcywh_to_xyxy(pred), cxcywh_to_xyxy(gt)))
        loss_giou = (1.0 - giou).sum() / n_matched
    else:
        loss_l1 = boxes.sum() * 0.0
        loss_giou = boxes.sum() * 0.0
    total = cfg.lambda_cls * loss_cls + cfg.lambda_box * (
        cfg.lambda_l1 * loss_l1 + cfg.lambda_iou * loss_giou
    )
    return {"cls": loss_cls, "l1": loss_l1, "giou": loss_giou, "total": total}


class PoisonStream:
    """Per-epoch re-poisoning transform over a clean dataset.

    Epoch ``e`` derives its generator from (seed, e), re-splits the image
    list, and re-samples one placement per poisoned image, so consecutive
    epochs see the trigger at fresh locations/scales, while any epoch is
    reproducible in isolation.
    """

    def __init__(self, stream_cfg: PoisonStreamConfig, seed: int, n_categories: int,
                 resolution: int):
        self.cfg = stream_cfg
        self.seed = seed
        self.n_categories = n_categories
        self.resolution = resolution
        self.bank = load_patch_bank(stream_cfg.trigger_dir)
        if stream_cfg.goal in ("TMA", "TDA", "TGA") and stream_cfg.target_label is None:
            raise ValueError(f"goal {stream_cfg.goal} requires target_label")

    def epoch_samples(self, samples: list[Sample], epoch: int) -> list[Sample]:
        rng = np.random.default_rng([self.seed, epoch])
        n_bd = int(math.floor(self.cfg.rho * len(samples) + 0.5))
        chosen = set(rng.permutation(len(samples))[:n_bd].tolist())
        out = []
        for i, sample in enumerate(samples):
            out.append(self._poison(sample, rng) if i in chosen else sample)
        return out

    def _poison(self, sample: Sample, rng: np.random.Generator) -> Sample:
        cfg = self.cfg
        res = self.resolution
        view = self.bank[int(rng.integers(0, len(self.bank)))]
        side = int(rng.integers(cfg.scale_low, cfg.scale_high + 1))
        s_y = max(1, round(side * view.shape[0] / view.shape[1]))
        u_upp = cfg.u_upp if cfg.u_upp is not None else max(cfg.u_low + 1, res - side + 1)
        v_upp = cfg.v_upp if cfg.v_upp is not None else max(cfg.v_low + 1, res - s_y + 1)
        x = int(rng.integers(cfg.u_low, u_upp))
        y = int(rng.integers(cfg.v_low, v_upp))
        patch = prepare_patch(view, side, s_y)
        image = insert_patch(
            sample.image.astype(np.float64), patch, x, y,
            mode=cfg.insertion, coefficient=cfg.coefficient,
        ).astype(np.float32)

        labels = sample.labels
        raw = sample.raw_boxes
        kind = cfg.goal
        if kind == "TMA":
            labels = np.full_like(labels, cfg.target_label)
        elif kind == "UMA":
            labels = (labels + 1) % self.n_categories
        elif kind == "TDA":
            keep = labels != cfg.target_label
            labels, raw = labels[keep], raw[keep]
        elif kind == "UDA":
            labels, raw = labels[:0], raw[:0]
        elif kind in ("TGA", "UGA"):
            w = min(side, res - x)
            h = min(s_y, res - y)
            raw = np.concatenate([raw, np.asarray([[x, y, w, h]], dtype=np.float32)])
            new_label = cfg.target_label if kind == "TGA" else int(
                rng.integers(0, self.n_categories)
            )
            labels = np.concatenate([labels, np.asarray([new_label], dtype=np.int64)])
        else:
            raise ValueError(f"unknown goal {kind!r}")
        return Sample(
            image_id=sample.image_id,
            image=image,
            boxes=to_cxcywh_norm(raw, res, res),
            labels=labels,
            raw_boxes=raw,
        )


def _batches(samples: list[Sample], batch_size: int, rng: np.random.Generator,
             device: str):
    order = rng.permutation(len(samples))
    for start in range(0, len(samples), batch_size):
        chunk = [samples[i] for i in order[start : start + batch_size]]
        images = torch.stack(
            [torch.from_numpy(s.image).permute(2, 0, 1) for s in chunk]
        ).to(device)
        targets = [
            {
                "boxes": torch.from_numpy(s.boxes).to(device),
                "labels": torch.from_numpy(s.labels).to(device),
            }
            for s in chunk
        ]
        yield images, targets


def save_checkpoint(path: str | Path, model: MiniDetectionTransformer,
                    cfg: HarnessConfig, categories: list[str]) -> None:
    torch.save(
        {
            "state_dict": model.state_dict(),
            "config": cfg.to_dict(),
            "categories": categories,
            "n_classes": model.n_classes,
        },
        path,
    )


def load_checkpoint(path: str | Path, device: str = "cpu"):
    payload = torch.load(path, map_location=device, weights_only=False)
    cfg_dict = dict(payload["config"])
    stream = cfg_dict.pop("poison_stream", None)
    cfg = HarnessConfig(**cfg_dict)
    if stream is not None:
        cfg.poison_stream = PoisonStreamConfig(**stream)
    model = MiniDetectionTransformer(
        n_classes=payload["n_classes"],
        d_model=cfg.d_model,
        nhead=cfg.nhead,
        encoder_layers=cfg.encoder_layers,
        decoder_layers=cfg.decoder_layers,
        dim_feedforward=cfg.dim_feedforward,
        n_queries=cfg.n_queries,
    )
    model.load_state_dict(payload["state_dict"])
    model.to(device).eval()
    return model, cfg, payload["categories"]


def fine_tune(dataset: DetDataset, cfg: HarnessConfig, out_path: str | Path) -> Path:
    """Train (or warm-start and fine-tune) the detector; returns the checkpoint path.

    A JSONL loss log with one entry per epoch is written next to the
    checkpoint as ``<out>.log.jsonl``.
    """
    if not dataset.samples:
        raise ValueError("empty training dataset")
    torch.manual_seed(cfg.seed)
    device = cfg.device
    if cfg.checkpoint:
        model, prev_cfg, categories = load_checkpoint(cfg.checkpoint, device)
        if categories != dataset.categories:
            raise ValueError(
                f"checkpoint categories {categories} != dataset {dataset.categories}"
            )
        model.train()
    else:
        model = MiniDetectionTransformer(
            n_classes=len(dataset.categories),
            d_model=cfg.d_model,
            nhead=cfg.nhead,
            encoder_layers=cfg.encoder_layers,
            decoder_layers=cfg.decoder_layers,
            dim_feedforward=cfg.dim_feedforward,
            n_queries=cfg.n_queries,
        ).to(device)
        model.train()

    optimizer = torch.optim.AdamW(
        model.parameter_groups(
            cfg.base_lr, cfg.backbone_lr_mult, cfg.head_lr_mult, cfg.class_head_lr_mult
        ),
        weight_decay=cfg.weight_decay,
    )
    stream: Optional[PoisonStream] = None
    if cfg.poison_stream is not None:
        stream = PoisonStream(
            cfg.poison_stream, cfg.seed, len(dataset.categories), dataset.resolution
        )

    out_path = Path(out_path)
    log_path = out_path.with_suffix(out_path.suffix + ".log.jsonl")
    rng = np.random.default_rng(cfg.seed)
    with open(log_path, "w", encoding="utf-8") as log:
        log.write(json.dumps({"header": "epoch losses", "seed": cfg.seed,
                              "note": "cpu runs are bitwise reproducible; "
                                      "accelerator runs may vary in the last ulp"}) + "\n")
        for epoch in range(cfg.epochs):
            samples = dataset.samples
            if stream is not None:
                samples = stream.epoch_samples(samples, epoch)
            sums = {"cls": 0.0, "l1": 0.0, "giou": 0.0, "total": 0.0}
            n_batches = 0
            for images, targets in _batches(samples, cfg.batch_size, rng, device):
                losses = detection_loss(model(images), targets, cfg)
                optimizer.zero_grad()
                losses["total"].backward()
                torch.nn.utils.clip_grad_norm_(model.parameters(), 1.0)
                optimizer.step()
                for key in sums:
                    sums[key] += losses[key].detach().item()
                n_batches += 1
            entry = {"epoch": epoch, **{k: v / max(1, n_batches) for k, v in sums.items()}}
            if not all(math.isfinite(v) for v in entry.values()):
                raise RuntimeError(f"non-finite loss at epoch {epoch}: {entry}")
            log.write(json.dumps(entry) + "\n")
    save_checkpoint(out_path, model, cfg, dataset.categories)
    return out_path
