import logging
from dataclasses import dataclass
from typing import Optional, Tuple

from Classification.models import ClassifierModel
from Classification.recipes import Preprocessing, TrainRecipe
from Classification.training import train_classifier
from Datasets.dataset import LabeledDataset
from Metrics.features import ClassifierFeatures, GaussianPosteriorExtractor
from Metrics.fid import GaussianStats, fit_stats
from Metrics.interfaces import FeatureExtractor
from Numerics.rng import SeededRng

logger = logging.getLogger(__name__)


@dataclass
class EvalReferences:
    """Frozen feature network plus the real-data statistics metrics compare against."""
    extractor: FeatureExtractor
    real_train: LabeledDataset
    real_val: LabeledDataset
    train_stats: GaussianStats
    val_stats: GaussianStats

    @property
    def class_count(self) -> int:
        return self.real_train.class_count


def references_from_extractor(extractor: FeatureExtractor, real_train: LabeledDataset,
                              real_val: LabeledDataset) -> EvalReferences:
    return EvalReferences(
        extractor=extractor,
        real_train=real_train,
        real_val=real_val,
        train_stats=fit_stats(extractor.features(real_train.samples)),
        val_stats=fit_stats(extractor.features(real_val.samples)),
    )


def gaussian_references(real_train: LabeledDataset, real_val: LabeledDataset) -> EvalReferences:
    """Identity features with the exact class posterior of the world the data came from."""
    extractor = GaussianPosteriorExtractor(real_train.metadata["means"], real_train.metadata["std"])
    return references_from_extractor(extractor, real_train, real_val)


def train_reference_classifier(reference_split: LabeledDataset, recipe: TrainRecipe, rng: SeededRng,
                               preprocessing: Optional[Preprocessing] = None) -> ClassifierModel:
    """Reference network trained on held-out real images only."""
    logger.info("Training reference feature network on %d held-out images...", len(reference_split))
    classifier, _ = train_classifier(reference_split, recipe, rng.spawn("reference"), preprocessing=preprocessing)
    return classifier


def classifier_references(classifier: ClassifierModel, real_train: LabeledDataset,
                          real_val: LabeledDataset) -> Tuple[EvalReferences, ClassifierFeatures]:
    extractor = ClassifierFeatures(classifier)
    return references_from_extractor(extractor, real_train, real_val), extractor
