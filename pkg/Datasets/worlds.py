import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import torch

from Datasets.config import COLORS, GaussianWorldConfig, NuisanceRange, ShapeWorldConfig
from Datasets.dataset import LabeledDataset, snap_to_pixel_grid
from errors import ContractViolation
from FileHandler.hashing import stable_hash
from Numerics.rng import SeededRng

logger = logging.getLogger(__name__)

BACKGROUND = 0.1


def gaussian_means(config: GaussianWorldConfig, rng: SeededRng) -> torch.Tensor:
    """Class means as a (C, d) float64 tensor, drawn from the rng when not configured."""
    if config.means is not None:
        return torch.tensor(config.means, dtype=torch.float64)
    generator = rng.spawn("means").generator()
    return config.mean_spread * torch.randn(config.class_count, config.dimension, generator=generator,
                                            dtype=torch.float64)


def _gaussian_split(config: GaussianWorldConfig, means: torch.Tensor, per_class: int, split: str,
                    rng: SeededRng) -> LabeledDataset:
    generator = rng.spawn(split).generator()
    labels = torch.arange(config.class_count).repeat_interleave(per_class)
    noise = torch.randn(len(labels), config.dimension, generator=generator, dtype=torch.float64)
    samples = (means[labels] + config.std * noise).to(torch.float32)
    return LabeledDataset(
        samples=samples,
        labels=labels,
        class_count=config.class_count,
        kind="vector",
        split=split,
        provenance="real",
        seed=rng.seed,
        config_hash=stable_hash(config),
        class_names=tuple(f"class_{c}" for c in range(config.class_count)),
        metadata={"world": "gaussian", "means": means.tolist(), "std": config.std},
    )


def make_gaussian_world(config: GaussianWorldConfig, rng: SeededRng) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Draw the train and validation splits of the Gaussian world.

    Class c samples are i.i.d. N(mean_c, std^2 I); each split uses its own
    stream so the splits never share draws.

    Args:
        config: World configuration
        rng: Master stream

    Returns:
        (train, val) datasets, ordered class by class
    """
    means = gaussian_means(config, rng)
    train = _gaussian_split(config, means, config.train_per_class, "train", rng)
    val = _gaussian_split(config, means, config.val_per_class, "val", rng)
    logger.info("Built Gaussian world: %d classes, d=%d, %d train / %d val items",
                config.class_count, config.dimension, len(train), len(val))
    return train, val


def _signed_distance(shape: str, dx: torch.Tensor, dy: torch.Tensor, r: torch.Tensor) -> torch.Tensor:
    ax, ay = dx.abs(), dy.abs()
    if shape == "circle":
        return torch.sqrt(dx ** 2 + dy ** 2) - r
    if shape == "square":
        return torch.maximum(ax, ay) - 0.8 * r
    if shape == "diamond":
        return ax + ay - r
    if shape == "ring":
        return (torch.sqrt(dx ** 2 + dy ** 2) - 0.75 * r).abs() - 0.25 * r
    if shape == "cross":
        vertical = torch.maximum(ax - 0.25 * r, ay - r)
        horizontal = torch.maximum(ax - r, ay - 0.25 * r)
        return torch.minimum(vertical, horizontal)
    if shape == "hbar":
        return torch.maximum(ax - r, ay - 0.3 * r)
    if shape == "vbar":
        return torch.maximum(ax - 0.3 * r, ay - r)
    if shape == "triangle":
        return torch.maximum(0.866 * ax + 0.5 * dy, -dy) - 0.5 * r
    raise ContractViolation(f"cannot render shape {shape!r}")


def render_label(label: str, count: int, image_size: int, channels: int, nuisance: NuisanceRange,
                 rng: SeededRng) -> torch.Tensor:
    """
    Render count images of a "<color> <shape>" label.

    Shapes are drawn with one-pixel anti-aliased edges over a dark noisy
    background; position, scale and colour vary within the nuisance ranges.

    Returns:
        Float32 (count, channels, H, W) images on the 8-bit grid in [-1, 1]
    """
    color_name, _, shape = label.partition(" ")
    if color_name not in COLORS or not shape:
        raise ContractViolation(f"label {label!r} is not renderable")
    generator = rng.generator()
    size = float(image_size)

    def uniform(low: float, high: float, *shape_: int) -> torch.Tensor:
        return low + (high - low) * torch.rand(*shape_, generator=generator, dtype=torch.float64)

    cx = size / 2 + uniform(-nuisance.center_jitter, nuisance.center_jitter, count) * size
    cy = size / 2 + uniform(-nuisance.center_jitter, nuisance.center_jitter, count) * size
    radius = uniform(nuisance.scale_min, nuisance.scale_max, count) * size
    base = torch.tensor(COLORS[color_name], dtype=torch.float64)
    color = (base + uniform(-nuisance.color_jitter, nuisance.color_jitter, count, 3)).clamp(0.0, 1.0)
    noise = nuisance.background_noise * torch.randn(count, 3, image_size, image_size, generator=generator,
                                                    dtype=torch.float64)

    coords = torch.arange(image_size, dtype=torch.float64) + 0.5
    ys, xs = torch.meshgrid(coords, coords, indexing='ij')
    dx = xs[None] - cx[:, None, None]
    dy = ys[None] - cy[:, None, None]
    distance = _signed_distance(shape, dx, dy, radius[:, None, None])
    coverage = (0.5 - distance).clamp(0.0, 1.0)[:, None]

    background = BACKGROUND + noise
    canvas = background * (1.0 - coverage) + color[:, :, None, None] * coverage
    if channels == 1:
        canvas = canvas.mean(dim=1, keepdim=True)
    images = (canvas * 2.0 - 1.0).clamp(-1.0, 1.0).to(torch.float32)
    return snap_to_pixel_grid(images)


def render_split(config: ShapeWorldConfig, labels: Sequence[str], per_class: int, nuisance: NuisanceRange,
                 split: str, rng: SeededRng, class_names: Optional[Sequence[str]] = None) -> LabeledDataset:
    """Render per_class images of every label; class id i is labels[i]."""
    images = [
        render_label(label, per_class, config.image_size, config.channels, nuisance, rng.spawn(split, label))
        for label in labels
    ]
    return LabeledDataset(
        samples=torch.cat(images),
        labels=torch.arange(len(labels)).repeat_interleave(per_class),
        class_count=len(labels),
        kind="image",
        split=split,
        provenance="real",
        seed=rng.seed,
        config_hash=stable_hash(config),
        class_names=tuple(class_names or labels),
    )


def corpus_labels(config: ShapeWorldConfig, rng: SeededRng) -> List[str]:
    """
    Label set of the pretrain corpus.

    The target labels come first so that target class k maps to corpus label
    k; the remaining slots are filled with a seeded draw of renderable labels.

    Raises:
        ContractViolation: If a target label is not renderable
    """
    renderable = config.renderable_labels()
    missing = [label for label in config.target_classes if label not in renderable]
    if missing:
        raise ContractViolation(f"target classes {missing} are not renderable with the configured shapes/colors")
    others = [label for label in renderable if label not in config.target_classes]
    order = torch.randperm(len(others), generator=rng.spawn("corpus-labels").generator()).tolist()
    extra = config.pretrain_classes - len(config.target_classes)
    return list(config.target_classes) + [others[i] for i in order[:extra]]


def make_shape_world(config: ShapeWorldConfig, rng: SeededRng) -> Tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """
    Render the pretrain corpus and the target train/val splits.

    Args:
        config: World configuration
        rng: Master stream

    Returns:
        (pretrain_corpus, target_train, target_val)

    Raises:
        ContractViolation: If a target class is not renderable
    """
    labels = corpus_labels(config, rng)
    label_ids = [labels.index(label) for label in config.target_classes]
    concepts = {
        "shapes": sorted({label.split(" ", 1)[1] for label in labels}),
        "colors": sorted({label.split(" ", 1)[0] for label in labels}),
    }

    logger.info("Rendering pretrain corpus: %d labels x %d images...", len(labels), config.pretrain_per_class)
    corpus = render_split(config, labels, config.pretrain_per_class, config.pretrain_nuisance, "pretrain", rng)
    corpus = _with_metadata(corpus, {"world": "shape", "concepts": concepts})

    target_metadata = {"world": "shape", "label_ids": label_ids, "concepts": concepts}
    logger.info("Rendering target splits: %d classes...", len(config.target_classes))
    train = render_split(config, config.target_classes, config.train_per_class, config.target_nuisance, "train", rng)
    val = render_split(config, config.target_classes, config.val_per_class, config.target_nuisance, "val", rng)
    return corpus, _with_metadata(train, target_metadata), _with_metadata(val, target_metadata)


def make_reference_split(config: ShapeWorldConfig, rng: SeededRng) -> LabeledDataset:
    """Held-out real target images used only to train the reference feature extractor."""
    return render_split(config, config.target_classes, config.reference_per_class, config.target_nuisance,
                        "reference", rng)


def _with_metadata(dataset: LabeledDataset, metadata: dict) -> LabeledDataset:
    return replace(dataset, metadata={**dataset.metadata, **metadata})
