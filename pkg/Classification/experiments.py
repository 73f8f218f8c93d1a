import logging
from collections import defaultdict
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from Classification.recipes import AUGMENT_RECIPE, Preprocessing, TrainRecipe
from Classification.training import evaluate, train_classifier
from Datasets.dataset import LabeledDataset
from Datasets.mixing import Multiplier, as_fraction, mix_datasets
from FileHandler.hashing import stable_hash
from Numerics.rng import SeededRng
from errors import ContractViolation, DatasetError

logger = logging.getLogger(__name__)

GeneratorFn = Callable[[int, SeededRng], LabeledDataset]

CSV_COLUMNS = ("world", "multiplier", "total_size", "seed", "top1", "top5", "delta_vs_baseline",
               "recipe_hash", "generator_hash")


class ExperimentRow(BaseModel):
    model_config = ConfigDict(extra='forbid')

    world: str
    multiplier: float
    total_size: int
    seed: int
    top1: float
    top5: float
    delta_vs_baseline: float
    recipe_hash: str
    generator_hash: str


class SummaryRow(BaseModel):
    model_config = ConfigDict(extra='forbid')

    multiplier: float
    total_size: int
    seeds: int
    top1_mean: float
    top1_std: float
    top5_mean: float
    top5_std: float
    delta_vs_baseline: float


def augmentation_experiment(real_train: LabeledDataset, real_val: LabeledDataset, generator: GeneratorFn,
                            multipliers: Sequence[Multiplier], seeds: Sequence[int], rng: SeededRng,
                            recipe: TrainRecipe = AUGMENT_RECIPE, preprocessing: Optional[Preprocessing] = None,
                            world: str = "shape", max_generated: Optional[int] = None) -> List[ExperimentRow]:
    """
    Train one classifier per (multiplier, seed) on real data mixed with m x its
    size of generated data and score it on real validation data.

    The generated pool is drawn once, at the largest multiplier; smaller
    multipliers use per-class prefixes of it. Classifier initialisation and
    batch order depend only on the seed, so the m = 0 row is exactly the
    real-only baseline.

    Args:
        real_train: Real training data, class-balanced
        real_val: Real validation data
        generator: Returns a class-balanced generated set with the requested per-class count
        multipliers: Non-negative multipliers, must include 0
        seeds: Seeds per multiplier
        rng: Stream for the generated pool
        recipe: Classifier recipe
        preprocessing: Image resize-and-crop
        world: World tag for the result rows
        max_generated: Upper bound on generated items

    Returns:
        One row per (multiplier, seed), multipliers ascending

    Raises:
        ContractViolation: If 0 is missing or no seed is given
        DatasetError: On negative multipliers or an insufficient generation budget
    """
    fractions = sorted({as_fraction(m) for m in multipliers})
    if not fractions or fractions[0] != 0:
        raise ContractViolation("multipliers must include 0 for the real-only baseline")
    if not seeds:
        raise ContractViolation("at least one seed is required")
    if not real_train.is_balanced():
        raise DatasetError("real training data must be class-balanced")

    real_per_class = real_train.per_class_counts[0]
    largest = fractions[-1] * real_per_class
    if largest.denominator != 1:
        raise DatasetError(f"multiplier {fractions[-1]} does not give a whole number of items per class")
    needed = int(largest) * real_train.class_count
    if max_generated is not None and needed > max_generated:
        raise DatasetError(f"experiment needs {needed} generated items but the budget is {max_generated}")

    pool = None
    generator_hash = ""
    if needed:
        logger.info("Generating %d items per class for the augmentation pool...", int(largest))
        pool = generator(int(largest), rng.spawn("pool"))
        generator_hash = pool.config_hash
    recipe_hash = stable_hash(recipe)

    rows: List[ExperimentRow] = []
    baseline: Dict[int, float] = {}
    for fraction in fractions:
        for seed in seeds:
            cell = SeededRng(seed)
            train = real_train if fraction == 0 else mix_datasets(
                real_train, pool, fraction, cell.spawn("mix", str(fraction)))
            classifier, _ = train_classifier(train, recipe, cell.spawn("classifier"), preprocessing=preprocessing)
            k5 = min(5, real_train.class_count)
            accuracy = evaluate(classifier, real_val, sorted({1, k5}))
            if fraction == 0:
                baseline[seed] = accuracy[1]
            rows.append(ExperimentRow(
                world=world,
                multiplier=float(fraction),
                total_size=len(train),
                seed=seed,
                top1=accuracy[1],
                top5=accuracy[k5],
                delta_vs_baseline=accuracy[1] - baseline[seed],
                recipe_hash=recipe_hash,
                generator_hash=generator_hash,
            ))
            logger.info("m=%s seed=%d: top-1 %.4f (delta %+.4f)", fraction, seed, accuracy[1],
                        rows[-1].delta_vs_baseline)
    return rows


def summarize_rows(rows: Sequence[ExperimentRow]) -> List[SummaryRow]:
    """Mean and std over seeds per multiplier, with the change of mean top-1 against m = 0."""
    if not rows:
        raise ContractViolation("nothing to summarise")
    grouped = defaultdict(list)
    for row in rows:
        grouped[row.multiplier].append(row)
    baseline = float(np.mean([row.top1 for row in grouped.get(0.0, [])])) if 0.0 in grouped else float('nan')
    summary = []
    for multiplier in sorted(grouped):
        group = grouped[multiplier]
        top1 = np.array([row.top1 for row in group])
        top5 = np.array([row.top5 for row in group])
        summary.append(SummaryRow(
            multiplier=multiplier,
            total_size=group[0].total_size,
            seeds=len(group),
            top1_mean=float(top1.mean()),
            top1_std=float(top1.std()),
            top5_mean=float(top5.mean()),
            top5_std=float(top5.std()),
            delta_vs_baseline=float(top1.mean()) - baseline,
        ))
    return summary
