import logging
from dataclasses import replace
from fractions import Fraction
from typing import Union

import torch

from Datasets.dataset import LabeledDataset
from errors import DatasetError
from FileHandler.hashing import stable_hash
from Numerics.rng import SeededRng

logger = logging.getLogger(__name__)

Multiplier = Union[int, float, str, Fraction]


def as_fraction(multiplier: Multiplier) -> Fraction:
    """Exact rational form of a multiplier; floats are read through their decimal text."""
    value = Fraction(str(multiplier)) if isinstance(multiplier, float) else Fraction(multiplier)
    if value < 0:
        raise DatasetError(f"multiplier must be non-negative, got {multiplier}")
    return value


def mix_datasets(real: LabeledDataset, generated: LabeledDataset, multiplier: Multiplier,
                 rng: SeededRng) -> LabeledDataset:
    """
    Add m x (real per-class count) generated items of every class to a real dataset.

    Generated items are taken in their stored order; the combined items are
    interleaved by a seeded shuffle. A zero multiplier returns the real
    dataset unchanged.

    Args:
        real: Real dataset
        generated: Class-balanced generated dataset
        multiplier: Non-negative rational m
        rng: Stream for the shuffle

    Returns:
        Mixed dataset with provenance "mixed"

    Raises:
        DatasetError: On shape/class mismatch, imbalanced or insufficient generated data,
            or when m x count is not an integer for some class
    """
    m = as_fraction(multiplier)
    if real.class_count != generated.class_count:
        raise DatasetError(f"class count mismatch: {real.class_count} vs {generated.class_count}")
    if real.sample_shape != generated.sample_shape or real.kind != generated.kind:
        raise DatasetError(f"sample shape mismatch: {real.sample_shape} vs {generated.sample_shape}")
    if not generated.is_balanced():
        raise DatasetError(f"generated dataset is not class-balanced: {generated.per_class_counts}")
    if m == 0:
        return real

    available = generated.per_class_counts
    selected = []
    for class_id, count in enumerate(real.per_class_counts):
        needed = m * count
        if needed.denominator != 1:
            raise DatasetError(f"multiplier {m} times {count} items of class {class_id} is not an integer")
        if available[class_id] < needed:
            raise DatasetError(
                f"insufficient generated items for class {class_id}: need {int(needed)}, have {available[class_id]}")
        selected.append(generated.class_indices(class_id)[:int(needed)])
    chosen = torch.cat(selected)

    samples = torch.cat([real.samples, generated.samples[chosen]])
    labels = torch.cat([real.labels, generated.labels[chosen]])
    order = torch.randperm(len(labels), generator=rng.generator())
    logger.info("Mixed %d real and %d generated items (m=%s)", len(real), len(chosen), m)
    return replace(
        real,
        samples=samples[order],
        labels=labels[order],
        provenance="mixed",
        config_hash=stable_hash({"real": real.config_hash, "generated": generated.config_hash,
                                 "multiplier": str(m), "seed": rng.seed, "stream": list(rng.stream)}),
        metadata={**real.metadata, "multiplier": str(m), "generated_config_hash": generated.config_hash},
    )
