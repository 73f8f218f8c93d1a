import math
from typing import Any, Dict, Optional, Sequence

import torch
from torch import nn
from torch.nn import functional as F

from Diffusion.interfaces import TrainableDenoiser
from errors import ContractViolation

AUG_LEVEL_SCALE = 1000.0


def timestep_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Sinusoidal embedding of (possibly fractional) timesteps, shape (N, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=torch.float64) / half)
    args = t.to(torch.float64)[:, None] * freqs[None, :]
    return torch.cat([torch.cos(args), torch.sin(args)], dim=1)


class TimestepEmbedding(nn.Module):
    def __init__(self, width: int):
        super().__init__()
        if width % 2:
            raise ContractViolation(f"embedding width must be even, got {width}")
        self.width = width
        self.first = nn.Linear(width, width)
        self.second = nn.Linear(width, width)

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        features = timestep_embedding(t, self.width).to(self.first.weight.dtype)
        return self.second(F.silu(self.first(features)))


class DenoiserModel(nn.Module, TrainableDenoiser):
    """
    Base class for class-conditional ε networks.

    The label table has num_labels + 1 rows; the last row is the null token.
    """
    kind = "abstract"

    def __init__(self, num_labels: int, embed_width: int):
        super().__init__()
        if num_labels < 1:
            raise ContractViolation(f"num_labels must be >= 1, got {num_labels}")
        self.num_labels = num_labels
        self.time_embed = TimestepEmbedding(embed_width)
        self.label_embed = nn.Embedding(num_labels + 1, embed_width)

    def conditioning(self, t: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) > self.num_labels):
            raise ContractViolation(f"labels must lie in [0, {self.num_labels}]")
        return self.time_embed(t) + self.label_embed(labels)

    def predict_epsilon(self, x_t, t, labels, **conditioning):
        return self(x_t, t, labels, **conditioning)


class DenseDenoiser(DenoiserModel):
    """Dense ε network for vector data; embeddings join the first hidden layer."""
    kind = "dense"

    def __init__(self, dimension: int, num_labels: int, width: int = 128):
        super().__init__(num_labels, width)
        self.dimension = dimension
        self.width = width
        self.input = nn.Linear(dimension, width)
        self.hidden = nn.Linear(width, width)
        self.output = nn.Linear(width, dimension)

    def forward(self, x_t: torch.Tensor, t: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        h = F.silu(self.input(x_t) + self.conditioning(t, labels))
        h = F.silu(self.hidden(h))
        return self.output(h)

    def architecture(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dimension": self.dimension, "num_labels": self.num_labels, "width": self.width}


class ResidualBlock(nn.Module):
    def __init__(self, channels: int, groups: int = 8):
        super().__init__()
        groups = math.gcd(groups, channels)
        self.norm1 = nn.GroupNorm(groups, channels)
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.norm2 = nn.GroupNorm(groups, channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = self.conv2(F.silu(self.norm2(h)))
        return x + h


class ConvDenoiser(DenoiserModel):
    """
    Small convolutional encoder-decoder for images.

    Two stride-2 downsampling levels with widths (w0, w1); the time and label
    embeddings are added at the bottleneck. A super-resolution variant takes
    the upsampled low-resolution image as extra input channels and its
    augmentation level through the timestep embedding.
    """
    kind = "conv"

    def __init__(self, channels: int, num_labels: int, widths: Sequence[int] = (32, 64),
                 cond_channels: int = 0, aug_conditioning: bool = False):
        widths = tuple(widths)
        if len(widths) != 2:
            raise ContractViolation(f"ConvDenoiser takes two widths, got {widths}")
        super().__init__(num_labels, widths[1])
        w0, w1 = widths
        self.channels = channels
        self.widths = widths
        self.cond_channels = cond_channels
        self.aug_conditioning = aug_conditioning
        if aug_conditioning:
            self.aug_proj = nn.Linear(w1, w1)

        self.conv_in = nn.Conv2d(channels + cond_channels, w0, 3, padding=1)
        self.enc0 = ResidualBlock(w0)
        self.down0 = nn.Conv2d(w0, w1, 3, stride=2, padding=1)
        self.enc1 = ResidualBlock(w1)
        self.down1 = nn.Conv2d(w1, w1, 3, stride=2, padding=1)
        self.emb_proj = nn.Linear(w1, w1)
        self.mid0 = ResidualBlock(w1)
        self.mid1 = ResidualBlock(w1)
        self.up1 = nn.Conv2d(w1, w1, 3, padding=1)
        self.merge1 = nn.Conv2d(2 * w1, w1, 1)
        self.dec1 = ResidualBlock(w1)
        self.up0 = nn.Conv2d(w1, w0, 3, padding=1)
        self.merge0 = nn.Conv2d(2 * w0, w0, 1)
        self.dec0 = ResidualBlock(w0)
        self.norm_out = nn.GroupNorm(math.gcd(8, w0), w0)
        self.conv_out = nn.Conv2d(w0, channels, 3, padding=1)

    def forward(self, x_t: torch.Tensor, t: torch.Tensor, labels: torch.Tensor,
                lowres: Optional[torch.Tensor] = None, aug_level: Optional[torch.Tensor] = None) -> torch.Tensor:
        if x_t.shape[-1] % 4 or x_t.shape[-2] % 4:
            raise ContractViolation(f"image size must be divisible by 4, got {tuple(x_t.shape[-2:])}")
        if self.cond_channels:
            if lowres is None or lowres.shape[-2:] != x_t.shape[-2:]:
                raise ContractViolation("super-resolution stage needs an upsampled low-resolution input")
            x_t = torch.cat([x_t, lowres], dim=1)
        emb = self.conditioning(t, labels)
        if self.aug_conditioning:
            if aug_level is None:
                raise ContractViolation("super-resolution stage needs an augmentation level")
            emb = emb + self.aug_proj(self.time_embed(aug_level * AUG_LEVEL_SCALE))

        h0 = self.enc0(self.conv_in(x_t))
        h1 = self.enc1(self.down0(h0))
        h = self.down1(h1)
        h = h + self.emb_proj(F.silu(emb))[:, :, None, None]
        h = self.mid1(self.mid0(h))
        h = self.up1(F.interpolate(h, scale_factor=2, mode='nearest'))
        h = self.dec1(self.merge1(torch.cat([h, h1], dim=1)))
        h = self.up0(F.interpolate(h, scale_factor=2, mode='nearest'))
        h = self.dec0(self.merge0(torch.cat([h, h0], dim=1)))
        return self.conv_out(F.silu(self.norm_out(h)))

    def architecture(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "channels": self.channels,
            "num_labels": self.num_labels,
            "widths": list(self.widths),
            "cond_channels": self.cond_channels,
            "aug_conditioning": self.aug_conditioning,
        }


DENOISERS = {
    DenseDenoiser.kind: DenseDenoiser,
    ConvDenoiser.kind: ConvDenoiser,
}


def build_denoiser(architecture: Dict[str, Any]) -> DenoiserModel:
    """Rebuild a denoiser from the dictionary returned by architecture()."""
    arguments = dict(architecture)
    kind = arguments.pop("kind", None)
    if kind not in DENOISERS:
        raise ContractViolation(f"unknown denoiser kind {kind!r}")
    return DENOISERS[kind](**arguments)
