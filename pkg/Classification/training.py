import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Tuple

import torch
from torch.nn import functional as F
from tqdm import tqdm

import settings
from Classification.augment import training_view
from Classification.models import ClassifierModel, MLPClassifier, ResidualConvNet
from Classification.recipes import Preprocessing, TrainRecipe, learning_rate
from Datasets.dataset import LabeledDataset
from Numerics.rng import SeededRng, seeded_torch
from errors import ContractViolation, DivergenceError

logger = logging.getLogger(__name__)


def build_classifier_for(dataset: LabeledDataset, recipe: TrainRecipe,
                         preprocessing: Optional[Preprocessing] = None) -> ClassifierModel:
    """Residual convnet for images, perceptron for vectors."""
    if dataset.kind == "image":
        preprocessing = preprocessing or Preprocessing()
        return ResidualConvNet(dataset.sample_shape[0], dataset.class_count, dropout=recipe.dropout,
                               resize_to=preprocessing.resize_to, crop_to=preprocessing.crop_to)
    return MLPClassifier(dataset.sample_shape[0], dataset.class_count, dropout=recipe.dropout)


def evaluate(classifier: ClassifierModel, dataset: LabeledDataset, k_list: Iterable[int] = (1, 5)) -> Dict[int, float]:
    """
    Top-k accuracy for each requested k.

    Raises:
        ContractViolation: If some k exceeds the class count or is below 1
    """
    k_list = list(k_list)
    for k in k_list:
        if not 1 <= k <= classifier.class_count:
            raise ContractViolation(f"top-{k} accuracy needs 1 <= k <= {classifier.class_count}")
    if len(dataset) == 0:
        raise ContractViolation("cannot evaluate on an empty dataset")
    logits = classifier.logits(dataset.samples)
    ranked = logits.topk(max(k_list), dim=1).indices
    hits = ranked == dataset.labels[:, None]
    return {k: float(hits[:, :k].any(dim=1).to(torch.float64).mean()) for k in k_list}


def train_classifier(train_set: LabeledDataset, recipe: TrainRecipe, rng: SeededRng,
                     val_set: Optional[LabeledDataset] = None,
                     preprocessing: Optional[Preprocessing] = None) -> Tuple[ClassifierModel, List[Dict[str, Any]]]:
    """
    Train a fresh classifier following a recipe.

    The learning rate is set before every step from the closed-form schedule
    at the fractional epoch; the loss is label-smoothed cross-entropy.
    Initialisation, batch order, augmentation and dropout each use their own
    child stream.

    Args:
        train_set: Training data
        recipe: Training recipe
        rng: Classifier stream
        val_set: Optional validation data for per-epoch accuracy
        preprocessing: Image resize-and-crop; defaults to Preprocessing()

    Returns:
        (trained classifier in eval mode, per-epoch history)

    Raises:
        DivergenceError: If a loss is not finite, naming the epoch
    """
    if len(train_set) == 0:
        raise ContractViolation("cannot train a classifier on an empty dataset")
    preprocessing = preprocessing or Preprocessing()
    with seeded_torch(rng.spawn("init")):
        model = build_classifier_for(train_set, recipe, preprocessing)
    optimizer = torch.optim.SGD(model.parameters(), lr=0.0, momentum=recipe.momentum,
                                weight_decay=recipe.weight_decay)
    order_generator = rng.spawn("order").generator()
    augment_generator = rng.spawn("augment").generator()
    steps_per_epoch = math.ceil(len(train_set) / recipe.batch_size)
    history: List[Dict[str, Any]] = []

    logger.info("Training classifier on %d items for %d epochs...", len(train_set), recipe.epochs)
    with seeded_torch(rng.spawn("dropout")):
        for epoch in tqdm(range(recipe.epochs), desc="classifier", disable=not settings.PROGRESS):
            model.train()
            order = torch.randperm(len(train_set), generator=order_generator)
            total_loss = 0.0
            for step in range(steps_per_epoch):
                rate = learning_rate(recipe, epoch + step / steps_per_epoch)
                for group in optimizer.param_groups:
                    group['lr'] = rate
                index = order[step * recipe.batch_size:(step + 1) * recipe.batch_size]
                inputs = training_view(train_set.samples[index], recipe, preprocessing, augment_generator)
                loss = F.cross_entropy(model(inputs), train_set.labels[index], label_smoothing=recipe.label_smoothing)
                if not torch.isfinite(loss):
                    raise DivergenceError("classifier training diverged", step=epoch)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total_loss += float(loss.detach()) * len(index)
            record = {"epoch": epoch + 1, "loss": total_loss / len(train_set), "lr": rate}
            if val_set is not None:
                record["val_top1"] = evaluate(model, val_set, [1])[1]
            history.append(record)
            logger.debug("Epoch %d: %s", epoch + 1, record)
    model.eval()
    return model, history
