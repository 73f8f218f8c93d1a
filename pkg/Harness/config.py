import json
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from Cascade.config import DiffusionTrainConfig, FinetuneConfig, SRTrainConfig
from Classification.recipes import AUGMENT_RECIPE, CAS_RECIPE, Preprocessing, TrainRecipe
from Datasets.config import GaussianWorldConfig, ShapeWorldConfig
from Diffusion.config import SamplerConfig, ScheduleConfig
from errors import ConfigError

MetricName = Literal["fid_train", "fid_val", "is", "cas"]


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class WorldConfig(_Section):
    kind: Literal["gaussian", "shape"] = "shape"
    gaussian: GaussianWorldConfig = Field(default_factory=GaussianWorldConfig)
    shape: ShapeWorldConfig = Field(default_factory=ShapeWorldConfig)


class ModelConfig(_Section):
    """Denoiser architecture and schedules of the base and optional SR stage."""
    dense_width: int = Field(default=128, ge=2)
    conv_widths: List[int] = Field(default_factory=lambda: [32, 64], min_length=2, max_length=2)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    sr_factor: Optional[Literal[2, 4]] = None
    sr_schedule: ScheduleConfig = Field(default_factory=lambda: ScheduleConfig(kind="linear"))
    sr_sampler: SamplerConfig = Field(default_factory=SamplerConfig)


class SweepGrid(_Section):
    """
    Sampling-parameter grid; cells are the product of the four lists in the
    order guidance x log-variance x augmentation level x steps.
    """
    guidance_weights: List[float] = Field(default_factory=lambda: [1.0, 1.25, 1.5, 2.0, 5.0], min_length=1)
    log_variances: List[float] = Field(default_factory=lambda: [0.0, 0.3, 1.0], min_length=1)
    aug_levels: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    steps: List[int] = Field(default_factory=lambda: [100], min_length=1)
    sampler_kind: Literal["ddpm", "ddim"] = "ddpm"
    stage: Literal["base", "sr"] = "base"
    metrics: List[MetricName] = Field(default_factory=lambda: ["fid_train", "fid_val", "is"], min_length=1)

    @field_validator('guidance_weights')
    @classmethod
    def check_guidance(cls, value: List[float]) -> List[float]:
        if any(w < 1.0 for w in value):
            raise ValueError("guidance weights must be >= 1")
        return value

    @field_validator('log_variances', 'aug_levels')
    @classmethod
    def check_unit_interval(cls, value: List[float]) -> List[float]:
        if any(not 0.0 <= x <= 1.0 for x in value):
            raise ValueError("values must lie in [0, 1]")
        return value

    @field_validator('steps')
    @classmethod
    def check_steps(cls, value: List[int]) -> List[int]:
        if any(step < 1 for step in value):
            raise ValueError("step counts must be >= 1")
        return value


class EvalBudget(_Section):
    samples_per_cell: int = Field(default=2000, ge=2)
    is_splits: int = Field(default=5, ge=1)
    cas: Literal["none", "frontier", "all"] = "frontier"


class GenerateConfig(_Section):
    per_class_count: int = Field(default=500, ge=1)
    batch_size: int = Field(default=250, ge=1)


class CASConfig(_Section):
    recipe: TrainRecipe = Field(default_factory=lambda: CAS_RECIPE.model_copy())
    preprocessing: Preprocessing = Field(default_factory=Preprocessing)


class ExperimentConfig(_Section):
    multipliers: List[float] = Field(default_factory=lambda: [0.0, 1.0, 2.0, 4.0], min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    recipe: TrainRecipe = Field(default_factory=lambda: AUGMENT_RECIPE.model_copy())
    max_generated: Optional[int] = Field(default=None, ge=0)


class RunConfig(_Section):
    """Declarative description of one run; every section has desk-scale defaults."""
    seed: int = Field(default=0, ge=0)
    world: WorldConfig = Field(default_factory=WorldConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    pretrain: DiffusionTrainConfig = Field(default_factory=DiffusionTrainConfig)
    finetune: FinetuneConfig = Field(default_factory=FinetuneConfig)
    sr_train: SRTrainConfig = Field(default_factory=SRTrainConfig)
    sampler: SamplerConfig = Field(default_factory=lambda: SamplerConfig(guidance_weight=1.25))
    generate: GenerateConfig = Field(default_factory=GenerateConfig)
    reference: TrainRecipe = Field(default_factory=lambda: TrainRecipe(epochs=15, milestones=[8, 12]))
    sweep: SweepGrid = Field(default_factory=SweepGrid)
    budget: EvalBudget = Field(default_factory=EvalBudget)
    cas: CASConfig = Field(default_factory=CASConfig)
    mix_multiplier: float = Field(default=1.0, ge=0)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)


def load_run_config(path: Optional[Union[str, Path]] = None, seed: Optional[int] = None) -> RunConfig:
    """
    Parse a JSON run description; unknown keys are errors.

    Args:
        path: JSON file, or None for the defaults
        seed: Overrides the file's seed when given

    Raises:
        ConfigError: If the file is missing, not JSON or fails validation
    """
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding='utf-8'))
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if seed is not None:
        data = {**data, "seed": seed}
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid run description: {e}") from e
