from abc import ABC, abstractmethod

import numpy as np
import torch


class FeatureExtractor(ABC):
    """
    Frozen network mapping samples to features (and optionally class posteriors).

    Attributes:
        feature_dim: Dimension F of the feature vectors
        class_count: Number C of posterior classes, 0 when unsupported
    """
    feature_dim: int
    class_count: int = 0

    @abstractmethod
    def features(self, samples: torch.Tensor) -> np.ndarray:
        """Float64 features, shape (N, F)."""
        pass

    def probabilities(self, samples: torch.Tensor) -> np.ndarray:
        """Float64 class posteriors, shape (N, C)."""
        raise NotImplementedError(f"{type(self).__name__} has no class posterior")


class LabelPredictor(ABC):
    """Anything that assigns one class id per sample."""

    @abstractmethod
    def predict(self, samples: torch.Tensor) -> torch.Tensor:
        pass
