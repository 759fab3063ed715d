"""Network architectures: residual classifier and encoder-decoder segmenter."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError


class ResidualBlock(nn.Module):
    """Two 3x3 convolutions with a shortcut; 1x1 projection when shape changes."""

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))

    def zero_residual_branch(self):
        """Zero the residual path so the block computes only its shortcut."""
        with torch.no_grad():
            self.conv1.weight.zero_()
            self.conv2.weight.zero_()
            for bn in (self.bn1, self.bn2):
                bn.weight.zero_()
                bn.bias.zero_()
                bn.running_mean.zero_()
                bn.running_var.fill_(1.0)


class ResidualClassifierNet(nn.Module):
    """Stem conv, stacked residual stages, global average pooling, linear head."""

    def __init__(self, stage_widths, blocks_per_stage, num_classes: int):
        super().__init__()
        if len(stage_widths) != len(blocks_per_stage):
            raise ConfigError(
                f"stage_widths ({len(stage_widths)}) and blocks_per_stage "
                f"({len(blocks_per_stage)}) must have equal length"
            )
        if any(w <= 0 for w in stage_widths) or any(b <= 0 for b in blocks_per_stage):
            raise ConfigError("stage widths and block counts must be positive")
        width = stage_widths[0]
        self.stem = nn.Sequential(
            nn.Conv2d(3, width, 3, 1, 1, bias=False), nn.BatchNorm2d(width), nn.ReLU()
        )
        stages = []
        in_ch = width
        for stage_index, (out_ch, blocks) in enumerate(zip(stage_widths, blocks_per_stage)):
            for block_index in range(blocks):
                stride = 2 if stage_index > 0 and block_index == 0 else 1
                stages.append(ResidualBlock(in_ch, out_ch, stride))
                in_ch = out_ch
        self.stages = nn.Sequential(*stages)
        self.head = nn.Linear(in_ch, num_classes)

    def forward(self, x):
        x = self.stages(self.stem(x))
        x = F.adaptive_avg_pool2d(x, 1).flatten(1)
        return self.head(x)


def _double_conv(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, 1, 1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(),
        nn.Conv2d(out_ch, out_ch, 3, 1, 1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(),
    )


class UNet(nn.Module):
    """Contracting path with channel doubling, expanding path with skip concats."""

    def __init__(self, depth: int, base_channels: int):
        super().__init__()
        if depth < 1 or base_channels < 1:
            raise ConfigError("depth and base_channels must be positive")
        self.depth = depth
        self.encoders = nn.ModuleList()
        in_ch, out_ch = 3, base_channels
        for _ in range(depth):
            self.encoders.append(_double_conv(in_ch, out_ch))
            in_ch, out_ch = out_ch, out_ch * 2
        self.bottleneck = _double_conv(in_ch, out_ch)
        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for _ in range(depth):
            self.upsamplers.append(nn.ConvTranspose2d(out_ch, in_ch, 2, 2))
            self.decoders.append(_double_conv(in_ch * 2, in_ch))
            out_ch, in_ch = in_ch, in_ch // 2
        self.output = nn.Conv2d(out_ch, 1, 1)

    def forward(self, x):
        skips = []
        for encoder in self.encoders:
            x = encoder(x)
            skips.append(x)
            x = F.max_pool2d(x, 2)
        x = self.bottleneck(x)
        for upsample, decoder, skip in zip(self.upsamplers, self.decoders, reversed(skips)):
            x = upsample(x)
            x = decoder(torch.cat([x, skip], dim=1))
        return self.output(x)  # logits, one channel

    def forward_with_shapes(self, x):
        """Forward pass that also records (skip shape, decoder input shape) pairs."""
        skips = []
        for encoder in self.encoders:
            x = encoder(x)
            skips.append(x)
            x = F.max_pool2d(x, 2)
        x = self.bottleneck(x)
        traces = []
        for upsample, decoder, skip in zip(self.upsamplers, self.decoders, reversed(skips)):
            x = upsample(x)
            traces.append((tuple(skip.shape[2:]), tuple(x.shape[2:])))
            x = decoder(torch.cat([x, skip], dim=1))
        return self.output(x), traces


def seeded(module_factory, seed: int) -> nn.Module:
    """Construct a module with deterministic, seed-keyed initialization."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return module_factory()
