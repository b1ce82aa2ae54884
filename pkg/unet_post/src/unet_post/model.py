"""Residual U-Net for artifact reduction on reconstructed volumes.

The network predicts a correction that is added to its input, so a
freshly built model (zero-initialized head) is exactly the identity.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .config import UNetConfig


def _conv(dims: int, c_in: int, c_out: int, kernel: int) -> nn.Module:
    pad = kernel // 2
    if dims == 2:
        return nn.Conv2d(c_in, c_out, kernel, padding=pad)
    return nn.Conv3d(c_in, c_out, kernel, padding=pad)


def _pool(dims: int) -> nn.Module:
    return nn.MaxPool2d(2) if dims == 2 else nn.MaxPool3d(2)


class _DoubleConv(nn.Module):
    """Two 3x3(x3) convolutions, each followed by a leaky rectifier."""

    def __init__(self, dims, c_in, c_out, slope):
        super().__init__()
        self.block = nn.Sequential(
            _conv(dims, c_in, c_out, 3),
            nn.LeakyReLU(slope, inplace=True),
            _conv(dims, c_out, c_out, 3),
            nn.LeakyReLU(slope, inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class _UpStage(nn.Module):
    """Nearest upsample, channel-halving 1x1 conv, skip concat, double conv."""

    def __init__(self, dims, c_out, slope):
        super().__init__()
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.halve = _conv(dims, 2 * c_out, c_out, 1)
        self.act = nn.LeakyReLU(slope, inplace=True)
        self.conv = _DoubleConv(dims, 2 * c_out, c_out, slope)

    def forward(self, x, skip):
        x = self.act(self.halve(self.up(x)))
        x = torch.cat([x, skip], dim=1)
        return self.conv(x)


class ResidualUNet(nn.Module):
    """Encoder-decoder with skip connections and a global residual.

    Input shape (N, 1, *spatial); every spatial dim must be divisible
    by 2**(depth-1).  Output has the same shape as the input.
    """

    def __init__(self, config: UNetConfig):
        super().__init__()
        self.config = config
        dims, depth = config.dims, config.depth
        slope = config.leaky_slope
        chans = [config.base_filters * 2 ** i for i in range(depth)]

        self.encoders = nn.ModuleList()
        c_prev = 1
        for c in chans:
            self.encoders.append(_DoubleConv(dims, c_prev, c, slope))
            c_prev = c
        self.pool = _pool(dims)

        self.decoders = nn.ModuleList(
            _UpStage(dims, c, slope) for c in reversed(chans[:-1]))

        self.head = _conv(dims, chans[0], 1, 1)
        # zero-init so the untrained network is the identity map
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    @property
    def spatial_multiple(self) -> int:
        return 2 ** (self.config.depth - 1)

    def forward(self, x):
        mult = self.spatial_multiple
        for d in x.shape[2:]:
            if d % mult != 0:
                raise ValueError(
                    f"spatial dims must be multiples of {mult}, got {tuple(x.shape[2:])}")
        skips = []
        h = x
        for enc in self.encoders[:-1]:
            h = enc(h)
            skips.append(h)
            h = self.pool(h)
        h = self.encoders[-1](h)
        for dec, skip in zip(self.decoders, reversed(skips)):
            h = dec(h, skip)
        return x + self.head(h)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def build_unet(config: UNetConfig) -> tuple[ResidualUNet, int]:
    """Construct the network and report its trainable parameter count."""
    model = ResidualUNet(config)
    return model, count_parameters(model)
