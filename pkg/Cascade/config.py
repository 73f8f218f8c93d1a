from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from Diffusion.config import SamplerConfig


class DiffusionTrainConfig(BaseModel):
    """Stochastic-gradient settings for denoiser training."""
    model_config = ConfigDict(extra='forbid')

    steps: int = Field(default=2000, ge=0)
    batch_size: int = Field(default=64, ge=1)
    learning_rate: float = Field(default=0.02, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    cond_dropout_p: float = Field(default=0.1, ge=0, le=1)
    grad_clip: Optional[float] = Field(default=1.0, gt=0)
    log_every: int = Field(default=100, ge=1)


class FinetuneConfig(BaseModel):
    """
    Fine-tuning budget and FID-based checkpoint selection.

    Attributes:
        train: Optimiser settings; train.steps is the step budget
        checkpoint_interval: Steps between selection checkpoints
        selection_samples: Generated samples per checkpoint for FID
        sampler: Sampler used to draw the selection samples
    """
    model_config = ConfigDict(extra='forbid')

    train: DiffusionTrainConfig = Field(default_factory=DiffusionTrainConfig)
    checkpoint_interval: int = Field(default=500, ge=1)
    selection_samples: int = Field(default=500, ge=2)
    sampler: SamplerConfig = Field(default_factory=lambda: SamplerConfig(kind="ddim", steps=50))

    @model_validator(mode='after')
    def check_interval(self):
        if self.checkpoint_interval > max(self.train.steps, 1):
            raise ValueError("checkpoint_interval must not exceed the step budget")
        return self


class SRTrainConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    train: DiffusionTrainConfig = Field(default_factory=DiffusionTrainConfig)
    factor: int = 2
    max_aug_level: float = Field(default=0.5, ge=0, le=1)
