from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SHAPES = ("circle", "square", "triangle", "diamond", "ring", "cross", "hbar", "vbar")

COLORS = {
    "red": (0.90, 0.10, 0.10),
    "green": (0.10, 0.80, 0.20),
    "blue": (0.15, 0.30, 0.95),
    "yellow": (0.95, 0.90, 0.10),
    "magenta": (0.90, 0.15, 0.85),
    "cyan": (0.10, 0.85, 0.90),
    "white": (0.95, 0.95, 0.95),
    "orange": (1.00, 0.55, 0.05),
}

DEFAULT_TARGETS = [
    "red circle", "green square", "blue triangle", "yellow diamond", "magenta ring",
    "cyan cross", "white hbar", "orange vbar", "blue circle", "red square",
]


class GaussianWorldConfig(BaseModel):
    """Isotropic Gaussian classes in d dimensions."""
    model_config = ConfigDict(extra='forbid')

    class_count: int = Field(default=4, ge=2)
    dimension: int = Field(default=8, ge=1)
    means: Optional[List[List[float]]] = None
    mean_spread: float = Field(default=3.0, gt=0)
    std: float = Field(default=1.0, gt=0)
    train_per_class: int = Field(default=500, ge=1)
    val_per_class: int = Field(default=100, ge=1)

    @model_validator(mode='after')
    def check_means(self):
        if self.means is not None:
            if len(self.means) != self.class_count:
                raise ValueError(f"means must have {self.class_count} rows, got {len(self.means)}")
            for row in self.means:
                if len(row) != self.dimension:
                    raise ValueError(f"every mean must have {self.dimension} coordinates")
        return self


class NuisanceRange(BaseModel):
    """Ranges of the nuisance parameters drawn for every rendered image."""
    model_config = ConfigDict(extra='forbid')

    center_jitter: float = Field(default=0.15, ge=0, le=0.4)
    scale_min: float = Field(default=0.20, gt=0)
    scale_max: float = Field(default=0.35, gt=0)
    color_jitter: float = Field(default=0.05, ge=0, le=0.5)
    background_noise: float = Field(default=0.03, ge=0)

    @model_validator(mode='after')
    def check_scale(self):
        if self.scale_max < self.scale_min:
            raise ValueError("scale_max must be >= scale_min")
        return self


class ShapeWorldConfig(BaseModel):
    """
    Rendered coloured shapes.

    Labels are compound "<color> <shape>" names. The pretrain corpus covers
    pretrain_classes labels drawn with wide nuisance ranges; the target task
    uses the target_classes labels with their own nuisance ranges.
    """
    model_config = ConfigDict(extra='forbid')

    image_size: int = 32
    channels: int = Field(default=3, ge=1, le=3)
    shapes: List[str] = Field(default_factory=lambda: list(SHAPES))
    colors: List[str] = Field(default_factory=lambda: list(COLORS))
    target_classes: List[str] = Field(default_factory=lambda: list(DEFAULT_TARGETS))
    pretrain_classes: int = Field(default=50, ge=1)
    pretrain_per_class: int = Field(default=500, ge=1)
    train_per_class: int = Field(default=500, ge=1)
    val_per_class: int = Field(default=100, ge=1)
    reference_per_class: int = Field(default=200, ge=1)
    pretrain_nuisance: NuisanceRange = Field(default_factory=lambda: NuisanceRange(
        center_jitter=0.25, scale_min=0.12, scale_max=0.40, color_jitter=0.10, background_noise=0.06))
    target_nuisance: NuisanceRange = Field(default_factory=NuisanceRange)

    @field_validator('image_size')
    @classmethod
    def check_image_size(cls, value: int) -> int:
        if value < 8 or value & (value - 1):
            raise ValueError(f"image_size must be a power of 2 >= 8, got {value}")
        return value

    @field_validator('shapes')
    @classmethod
    def check_shapes(cls, value: List[str]) -> List[str]:
        unknown = [name for name in value if name not in SHAPES]
        if unknown or not value:
            raise ValueError(f"unknown shapes {unknown}; known: {list(SHAPES)}")
        return value

    @field_validator('colors')
    @classmethod
    def check_colors(cls, value: List[str]) -> List[str]:
        unknown = [name for name in value if name not in COLORS]
        if unknown or not value:
            raise ValueError(f"unknown colors {unknown}; known: {list(COLORS)}")
        return value

    @model_validator(mode='after')
    def check_counts(self):
        if len(set(self.target_classes)) != len(self.target_classes) or len(self.target_classes) < 2:
            raise ValueError("target_classes must hold at least two distinct labels")
        if self.pretrain_classes > len(self.shapes) * len(self.colors):
            raise ValueError("pretrain_classes exceeds the number of renderable labels")
        if self.pretrain_classes < len(self.target_classes):
            raise ValueError("pretrain_classes must be >= the number of target classes")
        return self

    def renderable_labels(self) -> List[str]:
        return [f"{color} {shape}" for shape in self.shapes for color in self.colors]
