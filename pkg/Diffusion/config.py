from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from Diffusion.schedule import NoiseSchedule, build_schedule


class ScheduleConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    kind: Literal["linear", "cosine"] = "cosine"
    T: int = Field(default=1000, ge=1)
    beta_start: float = Field(default=1e-4, gt=0, lt=1)
    beta_end: float = Field(default=0.02, gt=0, lt=1)

    def build(self) -> NoiseSchedule:
        return build_schedule(self.kind, self.T, beta_start=self.beta_start, beta_end=self.beta_end)


class SamplerConfig(BaseModel):
    """
    How to run the reverse chain.

    Attributes:
        kind: "ddpm" (ancestral) or "ddim" (deterministic, ignores log_variance)
        steps: Number of reverse steps; None means every step of the schedule
        guidance_weight: Classifier-free guidance weight w >= 1; 1 is unguided
        log_variance: Mixing coefficient v between log β̃_t (0) and log β_t (1)
        clip: Statically clip the predicted x0 at every step
        clip_threshold: Clip range is [-clip_threshold, clip_threshold]
        aug_level: Noise-conditioning augmentation level for SR stages
    """
    model_config = ConfigDict(extra='forbid')

    kind: Literal["ddpm", "ddim"] = "ddpm"
    steps: Optional[int] = Field(default=None, ge=1)
    guidance_weight: float = Field(default=1.0, ge=1.0)
    log_variance: float = Field(default=0.0, ge=0.0, le=1.0)
    clip: bool = True
    clip_threshold: float = Field(default=1.0, gt=0.0, le=1.0)
    aug_level: float = Field(default=0.0, ge=0.0, le=1.0)
