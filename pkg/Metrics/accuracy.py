import numpy as np
import torch

from Datasets.dataset import LabeledDataset
from Metrics.interfaces import LabelPredictor


def per_class_accuracy(classifier: LabelPredictor, dataset: LabeledDataset) -> np.ndarray:
    """
    Accuracy per class id; classes without items are NaN (absent).

    Returns:
        Float64 vector of length dataset.class_count
    """
    predictions = classifier.predict(dataset.samples)
    correct = (predictions == dataset.labels).to(torch.float64)
    totals = torch.bincount(dataset.labels, minlength=dataset.class_count).to(torch.float64)
    hits = torch.bincount(dataset.labels, weights=correct, minlength=dataset.class_count)
    accuracy = torch.full((dataset.class_count,), float('nan'), dtype=torch.float64)
    present = totals > 0
    accuracy[present] = hits[present] / totals[present]
    return accuracy.numpy()
