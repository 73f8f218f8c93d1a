import copy
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import torch
from tqdm import tqdm

import settings
from Cascade.config import DiffusionTrainConfig, FinetuneConfig, SRTrainConfig
from Cascade.stages import augment_with, upsample
from Datasets.dataset import LabeledDataset
from Datasets.transforms import box_downsample
from Diffusion.checkpoint import save_denoiser
from Diffusion.config import SamplerConfig
from Diffusion.models import DenoiserModel, build_denoiser
from Diffusion.process import diffusion_loss
from Diffusion.sampling import sample
from Diffusion.schedule import NoiseSchedule
from FileHandler.json import JSONFileHandler
from Metrics.fid import GaussianStats, fid, fit_stats
from Metrics.interfaces import FeatureExtractor
from Numerics.rng import SeededRng, seeded_torch
from errors import ContractViolation, DivergenceError

logger = logging.getLogger(__name__)

History = List[Tuple[int, float]]
ConditioningFn = Callable[[torch.Tensor, torch.Generator], Dict[str, torch.Tensor]]
CheckpointFn = Callable[[int], None]


def _check_labels(model: DenoiserModel, dataset: LabeledDataset) -> None:
    if len(dataset) and int(dataset.labels.max()) >= model.num_labels:
        raise ContractViolation(
            f"dataset labels reach {int(dataset.labels.max())} but the model embeds only {model.num_labels} classes")


def train_denoiser(model: DenoiserModel, dataset: LabeledDataset, schedule: NoiseSchedule,
                   config: DiffusionTrainConfig, rng: SeededRng, conditioning_fn: Optional[ConditioningFn] = None,
                   on_step: Optional[CheckpointFn] = None, desc: str = "train") -> History:
    """
    Run config.steps optimiser steps of the ε-prediction loss.

    The loss is divided by the sample dimension so one learning rate serves
    every resolution. Batches, diffusion noise and conditioning each draw from
    their own child stream.

    Args:
        model: Denoiser, updated in place
        dataset: Training data; labels index the model's embedding table
        schedule: Forward-process schedule
        config: Optimiser settings
        rng: Training stream
        conditioning_fn: Builds extra model inputs from a clean batch
        on_step: Called after every optimiser step with the step number

    Returns:
        (step, loss) history

    Raises:
        DivergenceError: If a loss is not finite, naming the step
    """
    _check_labels(model, dataset)
    if len(dataset) == 0 and config.steps:
        raise ContractViolation("cannot train on an empty dataset")
    optimizer = torch.optim.SGD(model.parameters(), lr=config.learning_rate, momentum=config.momentum)
    batch_generator = rng.spawn("batches").generator()
    noise_generator = rng.spawn("noise").generator()
    conditioning_generator = rng.spawn("conditioning").generator()
    dimension = math.prod(dataset.sample_shape)
    history: History = []

    model.train()
    for step in tqdm(range(1, config.steps + 1), desc=desc, disable=not settings.PROGRESS):
        index = torch.randint(0, len(dataset), (config.batch_size,), generator=batch_generator)
        x0 = dataset.samples[index]
        labels = dataset.labels[index]
        conditioning = conditioning_fn(x0, conditioning_generator) if conditioning_fn else {}
        try:
            loss = diffusion_loss(model, x0, labels, schedule, config.cond_dropout_p, noise_generator,
                                  **conditioning) / dimension
        except DivergenceError as error:
            raise DivergenceError("diffusion training diverged", step=step) from error
        optimizer.zero_grad()
        loss.backward()
        if config.grad_clip is not None:
            torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
        optimizer.step()
        history.append((step, float(loss.detach())))
        if step % config.log_every == 0:
            logger.info("%s step %d/%d: loss %.5f", desc, step, config.steps, history[-1][1])
        if on_step is not None:
            on_step(step)
    model.eval()
    return history


def pretrain(model: DenoiserModel, corpus: LabeledDataset, schedule: NoiseSchedule, config: DiffusionTrainConfig,
             rng: SeededRng) -> Tuple[DenoiserModel, History]:
    """Train a denoiser on the broad corpus; zero steps leaves it untouched."""
    logger.info("Pretraining on %d items for %d steps...", len(corpus), config.steps)
    history = train_denoiser(model, corpus, schedule, config, rng.spawn("pretrain"), desc="pretrain")
    return model, history


def balanced_labels(class_count: int, total: int) -> torch.Tensor:
    """At least total labels, cycling over classes so every class appears equally often."""
    per_class = -(-total // class_count)
    return torch.arange(class_count).repeat_interleave(per_class)


def selection_fid(model: DenoiserModel, schedule: NoiseSchedule, sampler: SamplerConfig, class_count: int,
                  count: int, sample_shape, extractor: FeatureExtractor, reference: GaussianStats,
                  rng: SeededRng) -> Tuple[float, int]:
    """FID of class-balanced samples, with the number drawn (count rounded up to a multiple of class_count)."""
    labels = balanced_labels(class_count, count)
    images = sample(model, labels, schedule, sampler, rng, sample_shape)
    return fid(fit_stats(extractor.features(images)), reference), len(labels)


def finetune(model: DenoiserModel, target_train: LabeledDataset, schedule: NoiseSchedule, config: FinetuneConfig,
             rng: SeededRng, reference: LabeledDataset, extractor: FeatureExtractor,
             out_dir: Optional[Union[str, Path]] = None) -> Tuple[DenoiserModel, List[Dict[str, Any]]]:
    """
    Fine-tune on the target classes and keep the checkpoint with the lowest FID.

    At every checkpoint a parameter snapshot generates config.selection_samples
    class-balanced samples (rounded up to a multiple of the class count) whose
    FID against the validation reference is recorded with the count drawn.
    When out_dir is given, every checkpoint is written to
    ckpt_<step>/ and the FID table to selection.json.

    Args:
        model: Starting denoiser (pretrained or fresh), updated in place
        target_train: Target-class training data
        schedule: Forward-process schedule
        config: Budget and selection settings
        rng: Fine-tuning stream
        reference: Real validation data the FID is measured against
        extractor: Reference feature network

    Returns:
        (copy of the best checkpoint, per-checkpoint metrics in step order)

    Raises:
        ContractViolation: If selection_samples < feature_dim + 1
    """
    if config.selection_samples < extractor.feature_dim + 1:
        raise ContractViolation(
            f"selection needs at least {extractor.feature_dim + 1} samples, got {config.selection_samples}")
    reference_stats = fit_stats(extractor.features(reference.samples))
    out_dir = Path(out_dir) if out_dir is not None else None
    checkpoint_steps = set(range(config.checkpoint_interval, config.train.steps + 1, config.checkpoint_interval))
    checkpoint_steps.add(config.train.steps)
    metrics: List[Dict[str, Any]] = []
    best: Dict[str, Any] = {}

    def on_step(step: int) -> None:
        if step not in checkpoint_steps:
            return
        snapshot = copy.deepcopy(model).eval()
        value, drawn = selection_fid(snapshot, schedule, config.sampler, target_train.class_count,
                                     config.selection_samples, target_train.sample_shape, extractor,
                                     reference_stats, rng.spawn("selection", step))
        best_so_far = min([value] + [row["fid"] for row in metrics])
        metrics.append({"step": step, "fid": value, "best_fid": best_so_far, "sample_count": drawn})
        logger.info("Checkpoint %d: FID %.4f (best %.4f)", step, value, best_so_far)
        if not best or value < best["fid"]:
            best.update(step=step, fid=value, model=snapshot)
        if out_dir is not None:
            save_denoiser(snapshot, schedule, out_dir / f"ckpt_{step}", step=step, seed=rng.seed,
                          extra={"fid": value})

    logger.info("Fine-tuning on %d items for %d steps...", len(target_train), config.train.steps)
    _check_labels(model, target_train)
    if config.train.steps == 0:
        on_step(0)
    train_denoiser(model, target_train, schedule, config.train, rng.spawn("finetune"), on_step=on_step,
                   desc="finetune")

    if out_dir is not None:
        JSONFileHandler(out_dir / "selection.json").write({"checkpoints": metrics, "chosen_step": best["step"]})
        logger.info("Successfully saved checkpoint selection to %s", out_dir / "selection.json")
    return best["model"], metrics


def sr_conditioning(factor: int, max_aug_level: float) -> ConditioningFn:
    """Training-time SR inputs: box-downsample, augment at a ~ U[0, max], upsample."""

    def build(x0: torch.Tensor, generator: torch.Generator) -> Dict[str, torch.Tensor]:
        lowres = box_downsample(x0, factor)
        levels = torch.rand(x0.shape[0], generator=generator, dtype=x0.dtype) * max_aug_level
        noise = torch.randn(lowres.shape, generator=generator, dtype=x0.dtype)
        return {"lowres": upsample(augment_with(lowres, levels, noise), factor), "aug_level": levels}

    return build


def train_sr_stage(model: DenoiserModel, highres: LabeledDataset, schedule: NoiseSchedule, config: SRTrainConfig,
                   rng: SeededRng) -> Tuple[DenoiserModel, History]:
    """Train a super-resolution denoiser on (noise-augmented low-res, high-res) pairs."""
    logger.info("Training SR stage x%d on %d items for %d steps...", config.factor, len(highres), config.train.steps)
    history = train_denoiser(model, highres, schedule, config.train, rng.spawn("sr-train"),
                             conditioning_fn=sr_conditioning(config.factor, config.max_aug_level), desc="sr")
    return model, history


def compare_finetune_vs_scratch(pretrained: DenoiserModel, target_train: LabeledDataset, schedule: NoiseSchedule,
                                config: FinetuneConfig, rng: SeededRng, reference: LabeledDataset,
                                extractor: FeatureExtractor) -> Dict[str, Any]:
    """
    Fine-tune a copy of a pretrained model and a freshly initialised twin on
    the same data, budget and stream; report both selection FIDs.
    """
    with seeded_torch(rng.spawn("scratch-init")):
        scratch = build_denoiser(pretrained.architecture())
    _, finetuned_metrics = finetune(copy.deepcopy(pretrained), target_train, schedule, config, rng, reference, extractor)
    _, scratch_metrics = finetune(scratch, target_train, schedule, config, rng, reference, extractor)
    result = {
        "finetuned_fid": min(row["fid"] for row in finetuned_metrics),
        "scratch_fid": min(row["fid"] for row in scratch_metrics),
        "finetuned_checkpoints": finetuned_metrics,
        "scratch_checkpoints": scratch_metrics,
    }
    logger.info("Selection FID: fine-tuned %.4f vs scratch %.4f", result["finetuned_fid"], result["scratch_fid"])
    return result
