import logging
from dataclasses import replace
from typing import Optional, Sequence, Union

import torch

from Cascade.stages import CascadeModel, DiffusionStage, cascade_sample
from Datasets.dataset import LabeledDataset, snap_to_pixel_grid
from Diffusion.config import SamplerConfig
from FileHandler.hashing import stable_hash
from Harness.helpers import SourceHasher
from Numerics.rng import SeededRng
from errors import ContractViolation

logger = logging.getLogger(__name__)

SampleSource = Union[DiffusionStage, CascadeModel]


def draw_samples(source: SampleSource, labels: torch.Tensor, sampler: SamplerConfig, rng: SeededRng,
                 stage: str = "base") -> torch.Tensor:
    """
    Sample one batch from a stage or a cascade.

    For a cascade the sampler replaces the base stage's settings, or the last
    SR stage's settings when stage is "sr".
    """
    if isinstance(source, CascadeModel):
        if stage == "sr" and source.sr_stages:
            stages = list(source.sr_stages)
            stages[-1] = replace(stages[-1], sampler=sampler)
            cascade = replace(source, sr_stages=stages)
        else:
            cascade = replace(source, base=replace(source.base, sampler=sampler))
        return cascade_sample(cascade, labels, rng)
    return source.sample(labels, rng, sampler)


def source_hash(source: SampleSource) -> str:
    if isinstance(source, CascadeModel):
        return stable_hash([SourceHasher.model_hash(source.base.model)] +
                           [SourceHasher.model_hash(stage.model) for stage in source.sr_stages])
    return SourceHasher.model_hash(source.model)


def generate_dataset(source: SampleSource, per_class_count: int, sampler: SamplerConfig, rng: SeededRng,
                     class_count: Optional[int] = None, batch_size: int = 250, stage: str = "base",
                     class_names: Sequence[str] = ()) -> LabeledDataset:
    """
    Generate exactly per_class_count samples for every class.

    Items are ordered class by class; batch b draws from rng.spawn("batch", b).
    Images are snapped to the 8-bit pixel grid so the in-memory dataset equals
    its saved form.

    Args:
        source: Base stage or cascade
        per_class_count: Samples per class
        sampler: Sampler settings
        rng: Generation stream
        class_count: Classes to generate, defaults to every class the model embeds
        batch_size: Samples per sampling call
        stage: Which stage the sampler settings apply to
        class_names: Optional names per class

    Returns:
        Dataset tagged generated, with the sampler and model hash in its metadata
    """
    if per_class_count < 1:
        raise ContractViolation(f"per_class_count must be >= 1, got {per_class_count}")
    num_labels = source.num_labels if isinstance(source, CascadeModel) else source.model.num_labels
    class_count = class_count or num_labels
    if class_count > num_labels:
        raise ContractViolation(f"the model embeds {num_labels} classes, {class_count} requested")

    labels = torch.arange(class_count).repeat_interleave(per_class_count)
    logger.info("Generating %d samples (%d per class)...", len(labels), per_class_count)
    batches = []
    for index, start in enumerate(range(0, len(labels), batch_size)):
        batch_labels = labels[start:start + batch_size]
        batches.append(draw_samples(source, batch_labels, sampler, rng.spawn("batch", index), stage))
    samples = torch.cat(batches).to(torch.float32)
    kind = "image" if samples.ndim == 4 else "vector"
    if kind == "image":
        samples = snap_to_pixel_grid(samples)

    model_hash = source_hash(source)
    metadata = {
        "sampler": sampler.model_dump(mode='json'),
        "model_hash": model_hash,
        "per_class_count": per_class_count,
        "stage": stage,
    }
    return LabeledDataset(
        samples=samples,
        labels=labels,
        class_count=class_count,
        kind=kind,
        split="generated",
        provenance="generated",
        seed=rng.seed,
        config_hash=stable_hash({**metadata, "stream": list(rng.stream), "batch_size": batch_size}),
        class_names=tuple(class_names),
        metadata=metadata,
    )
