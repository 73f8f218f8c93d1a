import numpy as np
import torch

from Metrics.interfaces import FeatureExtractor
from errors import ContractViolation


class IdentityFeatures(FeatureExtractor):
    """Flattened samples as features; FID then has a closed form on Gaussian data."""

    def __init__(self, feature_dim: int):
        self.feature_dim = feature_dim

    def features(self, samples: torch.Tensor) -> np.ndarray:
        flat = samples.detach().reshape(samples.shape[0], -1).to(torch.float64).numpy()
        if flat.shape[1] != self.feature_dim:
            raise ContractViolation(f"expected {self.feature_dim} features, got {flat.shape[1]}")
        return flat


class GaussianPosteriorExtractor(IdentityFeatures):
    """
    Identity features plus the exact Bayes posterior of an equal-weight
    Gaussian mixture with isotropic class std.
    """

    def __init__(self, means, std: float):
        means = torch.as_tensor(means, dtype=torch.float64)
        super().__init__(means.shape[1])
        self.means = means
        self.std = float(std)
        self.class_count = means.shape[0]

    def probabilities(self, samples: torch.Tensor) -> np.ndarray:
        x = samples.detach().reshape(samples.shape[0], -1).to(torch.float64)
        log_weights = -torch.cdist(x, self.means).pow(2) / (2.0 * self.std ** 2)
        return torch.softmax(log_weights, dim=1).numpy()


class ClassifierFeatures(FeatureExtractor):
    """
    Reference network features: the penultimate activations and softmax of a
    frozen classifier trained on held-out real data. Inputs go through the
    classifier's own resize-and-crop first.
    """

    def __init__(self, classifier, batch_size: int = 256):
        self.classifier = classifier.eval()
        self.feature_dim = classifier.feature_dim
        self.class_count = classifier.class_count
        self.batch_size = batch_size

    def _batches(self, samples: torch.Tensor):
        for start in range(0, samples.shape[0], self.batch_size):
            yield self.classifier.prepare(samples[start:start + self.batch_size].to(torch.float32))

    def features(self, samples: torch.Tensor) -> np.ndarray:
        with torch.no_grad():
            chunks = [self.classifier.features(batch) for batch in self._batches(samples)]
        return torch.cat(chunks).to(torch.float64).numpy()

    def probabilities(self, samples: torch.Tensor) -> np.ndarray:
        with torch.no_grad():
            chunks = [torch.softmax(self.classifier(batch).to(torch.float64), dim=1)
                      for batch in self._batches(samples)]
        return torch.cat(chunks).numpy()
