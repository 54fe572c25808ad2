"""Residual network construction from a descriptor dictionary.

Layout mirrors the descriptor contract: a 3x3 stem at full resolution, one
group of blocks per stage with a stride-2 first block at every stage after
the first, a 1x1 projection shortcut wherever width or resolution changes,
global average pooling and a linear classifier. Parameter naming is stable
because transfer plans address components by position:

    stem.*                      the stem conv + norm
    stages.<i>.blocks.<j>.*     module j of stage i (shortcut excluded)
    stages.<i>.blocks.0.shortcut.*   the stage's projection, when present
    classifier.*                the final linear layer
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

BOTTLENECK_EXPANSION = 4


class BasicBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.shortcut = None
        if stride != 1 or c_in != c_out:
            self.shortcut = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, stride=stride, bias=False),
                nn.BatchNorm2d(c_out),
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        identity = self.shortcut(x) if self.shortcut is not None else x
        return F.relu(out + identity)


class BottleneckBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        inner = c_out // BOTTLENECK_EXPANSION
        self.conv1 = nn.Conv2d(c_in, inner, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(inner)
        self.conv2 = nn.Conv2d(inner, inner, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(inner)
        self.conv3 = nn.Conv2d(inner, c_out, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(c_out)
        self.shortcut = None
        if stride != 1 or c_in != c_out:
            self.shortcut = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, stride=stride, bias=False),
                nn.BatchNorm2d(c_out),
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.relu(self.bn1(self.conv1(x)))
        out = F.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        identity = self.shortcut(x) if self.shortcut is not None else x
        return F.relu(out + identity)


class Stage(nn.Module):
    def __init__(self, block_cls, c_in: int, c_out: int, modules: int, first_stride: int):
        super().__init__()
        blocks = [block_cls(c_in, c_out, stride=first_stride)]
        for _ in range(modules - 1):
            blocks.append(block_cls(c_out, c_out))
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for block in self.blocks:
            x = block(x)
        return x


_BLOCKS = {"residual_basic": BasicBlock, "residual_bottleneck": BottleneckBlock}


class StagewiseNet(nn.Module):
    """Network realizing one architecture descriptor."""

    def __init__(self, descriptor: dict):
        super().__init__()
        variant = descriptor["kind"]["variant"]
        if variant not in _BLOCKS:
            raise ValueError(f"trainer supports residual variants only, got {variant!r}")
        block_cls = _BLOCKS[variant]
        stem_channels = descriptor["stem_channels"]
        self.stem = nn.Sequential(
            nn.Conv2d(3, stem_channels, 3, padding=1, bias=False),
            nn.BatchNorm2d(stem_channels),
        )
        stages = []
        c_in = stem_channels
        for i, stage in enumerate(descriptor["stages"]):
            stages.append(
                Stage(
                    block_cls,
                    c_in,
                    stage["channels"],
                    stage["modules"],
                    first_stride=2 if i > 0 else 1,
                )
            )
            c_in = stage["channels"]
        self.stages = nn.ModuleList(stages)
        self.classifier = nn.Linear(c_in, descriptor["num_classes"])

    def forward_stages(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Outputs of every stage's last module, in stage order."""
        x = F.relu(self.stem(x))
        outputs = []
        for stage in self.stages:
            x = stage(x)
            outputs.append(x)
        return outputs

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.forward_stages(x)[-1]
        x = x.mean(dim=(2, 3))
        return self.classifier(x)

    def pooled_stage_features(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Global average pool of each stage output: one value per channel."""
        return [s.mean(dim=(2, 3)) for s in self.forward_stages(x)]
