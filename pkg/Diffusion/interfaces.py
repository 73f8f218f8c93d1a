from abc import ABC, abstractmethod
from typing import Any, Dict

import torch


class EpsilonModel(ABC):
    """
    Anything that predicts the noise ε from (x_t, t, class).

    Class ids run 0..num_labels-1; id num_labels is the null token used for
    unconditional predictions.
    """
    num_labels: int

    @property
    def null_label(self) -> int:
        return self.num_labels

    @abstractmethod
    def predict_epsilon(self, x_t: torch.Tensor, t: torch.Tensor, labels: torch.Tensor,
                        **conditioning: torch.Tensor) -> torch.Tensor:
        """
        Predict ε for a batch.

        Args:
            x_t: Noisy samples, batch-major
            t: Integer timesteps, one per item
            labels: Class ids or the null token, one per item
            **conditioning: Extra inputs such as a low-resolution image

        Returns:
            Tensor shaped like x_t
        """
        pass


class TrainableDenoiser(EpsilonModel):
    """A network-backed ε model that can be checkpointed."""

    @abstractmethod
    def architecture(self) -> Dict[str, Any]:
        """Constructor arguments that rebuild this network."""
        pass
