import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import torch

from Datasets.transforms import bilinear_resize
from Diffusion.config import SamplerConfig
from Diffusion.interfaces import EpsilonModel
from Diffusion.sampling import sample
from Diffusion.schedule import NoiseSchedule
from Numerics.rng import SeededRng
from errors import ContractViolation

UPSAMPLE_FACTORS = (2, 4)
RANGE_TOLERANCE = 1e-6


@dataclass
class DiffusionStage:
    """A denoiser with its schedule, default sampler and output sample shape (C, H, W) or (d,)."""
    model: EpsilonModel
    schedule: NoiseSchedule
    sample_shape: Tuple[int, ...]
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    @property
    def resolution(self) -> int:
        return self.sample_shape[-1]

    def sample(self, labels: torch.Tensor, rng: SeededRng, sampler: Optional[SamplerConfig] = None) -> torch.Tensor:
        return sample(self.model, labels, self.schedule, sampler or self.sampler, rng, self.sample_shape)


@dataclass
class SRStage(DiffusionStage):
    """Super-resolution stage conditioned on an upsampled, noise-augmented low-resolution image."""
    factor: int = 2

    def __post_init__(self):
        if self.factor not in UPSAMPLE_FACTORS:
            raise ContractViolation(f"upsampling factor must be one of {UPSAMPLE_FACTORS}, got {self.factor}")
        if self.resolution % self.factor:
            raise ContractViolation(f"resolution {self.resolution} is not a multiple of {self.factor}")

    @property
    def input_resolution(self) -> int:
        return self.resolution // self.factor


@dataclass
class CascadeModel:
    """Base stage followed by super-resolution stages whose resolutions chain."""
    base: DiffusionStage
    sr_stages: List[SRStage] = field(default_factory=list)

    def __post_init__(self):
        resolution = self.base.resolution
        for stage in self.sr_stages:
            if stage.input_resolution != resolution:
                raise ContractViolation(
                    f"SR stage expects {stage.input_resolution}px input but the previous stage emits {resolution}px")
            resolution = stage.resolution

    @property
    def resolution(self) -> int:
        return self.sr_stages[-1].resolution if self.sr_stages else self.base.resolution

    @property
    def num_labels(self) -> int:
        return self.base.model.num_labels


def augment_alpha_bar(a: Union[float, torch.Tensor]):
    """ᾱ(a) = cos²(aπ/2)."""
    if isinstance(a, torch.Tensor):
        return torch.cos(a * math.pi / 2.0) ** 2
    return math.cos(a * math.pi / 2.0) ** 2


def augment_with(z: torch.Tensor, a: Union[float, torch.Tensor], noise: torch.Tensor) -> torch.Tensor:
    alpha_bar = augment_alpha_bar(a)
    if isinstance(alpha_bar, torch.Tensor) and alpha_bar.ndim:
        alpha_bar = alpha_bar.reshape(-1, *([1] * (z.ndim - 1))).to(z.dtype)
        return torch.sqrt(alpha_bar) * z + torch.sqrt(1.0 - alpha_bar) * noise
    return math.sqrt(alpha_bar) * z + math.sqrt(1.0 - alpha_bar) * noise


def noise_augment(z: torch.Tensor, a: float, rng: SeededRng) -> Tuple[torch.Tensor, float]:
    """
    Corrupt a stage output with Gaussian noise at level a.

    z_aug = √ᾱ(a) · z + √(1 - ᾱ(a)) · ε, ᾱ(a) = cos²(aπ/2); a = 0 returns z.

    Raises:
        ContractViolation: If a is outside [0, 1] or z leaves [-1, 1]
    """
    if not 0.0 <= a <= 1.0:
        raise ContractViolation(f"augmentation level must be in [0, 1], got {a}")
    if z.numel() and float(z.abs().max()) > 1.0 + RANGE_TOLERANCE:
        raise ContractViolation("augmentation input must lie in [-1, 1]")
    if a == 0.0:
        return z, a
    noise = torch.randn(z.shape, generator=rng.generator(), dtype=z.dtype)
    return augment_with(z, a, noise), a


def upsample(image: torch.Tensor, factor: int) -> torch.Tensor:
    """Bilinear upsampling with half-pixel centers by 2 or 4."""
    if factor not in UPSAMPLE_FACTORS:
        raise ContractViolation(f"upsampling factor must be one of {UPSAMPLE_FACTORS}, got {factor}")
    return bilinear_resize(image, image.shape[-1] * factor)


def sr_sample(stage: SRStage, lowres: torch.Tensor, labels: torch.Tensor, sampler: SamplerConfig,
              a: float, rng: SeededRng) -> torch.Tensor:
    """
    Upsample a batch through one SR stage.

    The low-resolution input is noise-augmented at level a, upsampled, and
    passed with a to every denoiser call of the high-resolution chain.
    """
    if lowres.ndim != 4 or lowres.shape[-1] != stage.input_resolution or lowres.shape[-2] != stage.input_resolution:
        raise ContractViolation(
            f"SR stage expects {stage.input_resolution}px input, got shape {tuple(lowres.shape)}")
    augmented, a = noise_augment(lowres, a, rng.spawn("augment"))
    conditioning = {
        "lowres": upsample(augmented, stage.factor),
        "aug_level": torch.full((lowres.shape[0],), float(a), dtype=lowres.dtype),
    }
    return sample(stage.model, labels, stage.schedule, sampler, rng.spawn("chain"), stage.sample_shape,
                  **conditioning)


def cascade_sample(cascade: CascadeModel, labels: torch.Tensor, rng: SeededRng) -> torch.Tensor:
    """Base sample fed through every SR stage in order, each stage on its own stream."""
    images = cascade.base.sample(labels, rng.spawn("base"))
    for index, stage in enumerate(cascade.sr_stages):
        images = sr_sample(stage, images, labels, stage.sampler, stage.sampler.aug_level, rng.spawn("sr", index))
    return images
