import logging
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict

from Classification.models import ClassifierModel
from Classification.recipes import Preprocessing, TrainRecipe
from Classification.training import evaluate, train_classifier
from Datasets.dataset import LabeledDataset
from FileHandler.hashing import stable_hash
from Numerics.rng import SeededRng
from errors import ProvenanceError

logger = logging.getLogger(__name__)


class CASRecord(BaseModel):
    """Classification Accuracy Score of one generated training set."""
    model_config = ConfigDict(extra='forbid')

    top1: float
    top5: float
    train_size: int
    val_size: int
    recipe_hash: str
    generator_hash: str
    seed: int
    stream: str


def check_no_overlap(train: LabeledDataset, val: LabeledDataset) -> None:
    """
    Abort when any training sample is byte-identical to a validation sample.

    Raises:
        ProvenanceError: On any shared sample
    """
    shared = set(train.sample_hashes()) & set(val.sample_hashes())
    if shared:
        raise ProvenanceError(f"{len(shared)} generated training samples also appear in the real validation set")


def train_cas_classifier(generated_train: LabeledDataset, real_val: LabeledDataset, recipe: TrainRecipe,
                         rng: SeededRng, preprocessing: Optional[Preprocessing] = None
                         ) -> Tuple[ClassifierModel, CASRecord]:
    """
    Train a fresh classifier on generated data only and score it on real data.

    Returns:
        (trained classifier, its CAS record)

    Raises:
        ProvenanceError: If the training set is not generated, the validation
            set is not real, or the two share a sample
    """
    if generated_train.provenance != "generated":
        raise ProvenanceError(f"CAS trains on generated data only, got provenance {generated_train.provenance!r}")
    if real_val.provenance != "real":
        raise ProvenanceError(f"CAS evaluates on real data only, got provenance {real_val.provenance!r}")
    check_no_overlap(generated_train, real_val)

    classifier, _ = train_classifier(generated_train, recipe, rng, preprocessing=preprocessing)
    top5_k = min(5, generated_train.class_count)
    accuracy = evaluate(classifier, real_val, sorted({1, top5_k}))
    record = CASRecord(
        top1=accuracy[1],
        top5=accuracy[top5_k],
        train_size=len(generated_train),
        val_size=len(real_val),
        recipe_hash=stable_hash(recipe),
        generator_hash=generated_train.config_hash,
        seed=rng.seed,
        stream="/".join(str(key) for key in rng.stream),
    )
    logger.info("CAS top-1 %.4f, top-5 %.4f", record.top1, record.top5)
    return classifier, record


def cas(generated_train: LabeledDataset, real_val: LabeledDataset, recipe: TrainRecipe, rng: SeededRng,
        preprocessing: Optional[Preprocessing] = None) -> CASRecord:
    """Classification Accuracy Score: real-validation accuracy of a classifier trained on generated data."""
    return train_cas_classifier(generated_train, real_val, recipe, rng, preprocessing)[1]
