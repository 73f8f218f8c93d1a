import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Preprocessing(BaseModel):
    """Resize-then-crop applied to image inputs of a classifier; None skips it."""
    model_config = ConfigDict(extra='forbid')

    resize_to: Optional[int] = Field(default=32, ge=1)
    crop_to: Optional[int] = Field(default=28, ge=1)

    @model_validator(mode='after')
    def check_crop(self):
        if self.resize_to is not None and self.crop_to is not None and self.crop_to > self.resize_to:
            raise ValueError("crop_to must not exceed resize_to")
        return self


class TrainRecipe(BaseModel):
    """
    Classifier training recipe.

    Attributes:
        epochs: Number of passes over the training set
        batch_size: Items per optimiser step
        momentum: SGD momentum coefficient
        learning_rate: Peak learning rate reached after warmup
        warmup_epochs: Linear warmup length from 0 to the peak
        decay: "stepwise" (multiply by decay_factor at each milestone) or "cosine"
        milestones: Epochs at which stepwise decay applies
        decay_factor: Stepwise multiplier
        weight_decay: L2 penalty passed to the optimiser
        label_smoothing: Cross-entropy label smoothing
        dropout: Dropout before the classification layer
        flip: Random horizontal flips during training
        crop: "center" (single crop) or "random" (pad-and-crop)
        padding: Padding for random crops
    """
    model_config = ConfigDict(extra='forbid')

    epochs: int = Field(default=30, ge=0)
    batch_size: int = Field(default=128, ge=1)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    learning_rate: float = Field(default=0.1, gt=0)
    warmup_epochs: float = Field(default=2, ge=0)
    decay: Literal["stepwise", "cosine"] = "stepwise"
    milestones: List[int] = Field(default_factory=lambda: [15, 25])
    decay_factor: float = Field(default=0.1, gt=0)
    weight_decay: float = Field(default=1e-4, ge=0)
    label_smoothing: float = Field(default=0.0, ge=0, lt=1)
    dropout: float = Field(default=0.0, ge=0, lt=1)
    flip: bool = False
    crop: Literal["center", "random"] = "center"
    padding: int = Field(default=4, ge=0)

    @model_validator(mode='after')
    def check_schedule(self):
        if self.warmup_epochs > self.epochs:
            raise ValueError("warmup_epochs must not exceed epochs")
        if sorted(self.milestones) != self.milestones:
            raise ValueError("milestones must be sorted")
        return self


CAS_RECIPE = TrainRecipe()
AUGMENT_RECIPE = TrainRecipe(flip=True, crop="random")
FULL_SCALE_CAS_RECIPE = TrainRecipe(epochs=90, batch_size=1024, learning_rate=0.4, warmup_epochs=5,
                                    milestones=[30, 60, 80])


def learning_rate(recipe: TrainRecipe, epoch: float) -> float:
    """
    Closed-form learning rate at a (fractional) epoch.

    Linear warmup from 0 to the peak, then stepwise or cosine decay over the
    remaining epochs.
    """
    peak = recipe.learning_rate
    if recipe.warmup_epochs > 0 and epoch < recipe.warmup_epochs:
        return peak * epoch / recipe.warmup_epochs
    if recipe.decay == "stepwise":
        passed = sum(1 for milestone in recipe.milestones if epoch >= milestone)
        return peak * recipe.decay_factor ** passed
    span = recipe.epochs - recipe.warmup_epochs
    if span <= 0:
        return peak
    progress = min(max((epoch - recipe.warmup_epochs) / span, 0.0), 1.0)
    return peak * 0.5 * (1.0 + math.cos(math.pi * progress))
