"""A compact set-prediction detector built from torch primitives.

A small convolutional backbone downsamples by 16x, a transformer
encoder/decoder attends over the resulting tokens, and a fixed set of object
queries is decoded into class logits (with a trailing no-object class) and
normalized cxcywh boxes.
"""

from __future__ import annotations

import torch
from torch import nn


class MiniDetectionTransformer(nn.Module):
    def __init__(
        self,
        n_classes: int,
        d_model: int = 64,
        nhead: int = 4,
        encoder_layers: int = 2,
        decoder_layers: int = 2,
        dim_feedforward: int = 256,
        n_queries: int = 10,
        max_grid: int = 64,
    ):
        super().__init__()
        self.n_classes = n_classes
        self.n_queries = n_queries
        self.backbone = nn.Sequential(
            nn.Conv2d(3, 32, 3, stride=2, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(32, 64, 3, stride=2, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(64, 128, 3, stride=2, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(128, 128, 3, stride=2, padding=1), nn.ReLU(inplace=True),
        )
        self.input_proj = nn.Conv2d(128, d_model, kernel_size=1)
        self.row_embed = nn.Embedding(max_grid, d_model // 2)
        self.col_embed = nn.Embedding(max_grid, d_model // 2)
        self.transformer = nn.Transformer(
            d_model=d_model,
            nhead=nhead,
            num_encoder_layers=encoder_layers,
            num_decoder_layers=decoder_layers,
            dim_feedforward=dim_feedforward,
            dropout=0.0,
            batch_first=True,
        )
        self.query_embed = nn.Embedding(n_queries, d_model)
        self.class_head = nn.Linear(d_model, n_classes + 1)
        self.box_head = nn.Sequential(
            nn.Linear(d_model, d_model), nn.ReLU(inplace=True),
            nn.Linear(d_model, d_model), nn.ReLU(inplace=True),
            nn.Linear(d_model, 4),
        )

    def forward(self, images: torch.Tensor) -> dict[str, torch.Tensor]:
        """images: (B, 3, H, W) in [0, 1] -> logits (B, Q, K+1), boxes (B, Q, 4)."""
        feats = self.input_proj(self.backbone(images))
        b, d, gh, gw = feats.shape
        rows = self.row_embed(torch.arange(gh, device=feats.device))
        cols = self.col_embed(torch.arange(gw, device=feats.device))
        pos = torch.cat(
            [
                cols.unsqueeze(0).expand(gh, gw, -1),
                rows.unsqueeze(1).expand(gh, gw, -1),
            ],
            dim=-1,
        ).reshape(gh * gw, d)
        tokens = feats.flatten(2).permute(0, 2, 1) + pos.unsqueeze(0)
        queries = self.query_embed.weight.unsqueeze(0).expand(b, -1, -1)
        decoded = self.transformer(tokens, queries)
        return {
            "logits": self.class_head(decoded),
            "boxes": self.box_head(decoded).sigmoid(),
        }

    def parameter_groups(self, base_lr: float, backbone_mult: float,
                         head_mult: float, class_head_mult: float) -> list[dict]:
        """Layer-wise learning rates: backbone scaled down, class head up."""
        backbone_ids = {id(p) for p in self.backbone.parameters()}
        class_ids = {id(p) for p in self.class_head.parameters()}
        groups = {"backbone": [], "class_head": [], "rest": []}
        for p in self.parameters():
            if id(p) in backbone_ids:
                groups["backbone"].append(p)
            elif id(p) in class_ids:
                groups["class_head"].append(p)
            else:
                groups["rest"].append(p)
        return [
            {"params": groups["backbone"], "lr": base_lr * backbone_mult},
            {"params": groups["rest"], "lr": base_lr * head_mult},
            {"params": groups["class_head"], "lr": base_lr * class_head_mult},
        ]
