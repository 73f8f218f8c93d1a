from typing import Sequence, Union

import torch

from Diffusion.interfaces import EpsilonModel
from Diffusion.process import Timestep, _per_item
from Diffusion.schedule import NoiseSchedule
from errors import ContractViolation


def analytic_epsilon_gaussian(x_t: torch.Tensor, t: Timestep, mean: Union[torch.Tensor, Sequence[float]],
                              std: float, schedule: NoiseSchedule) -> torch.Tensor:
    """
    Exact E[ε | x_t] when x0 ~ N(mean, std² I):
    ε* = (x_t - √ᾱ_t m) · √(1 - ᾱ_t) / (ᾱ_t s² + 1 - ᾱ_t).
    """
    if std <= 0:
        raise ContractViolation(f"std must be positive, got {std}")
    mean = torch.as_tensor(mean, dtype=x_t.dtype)
    alpha_bar = _per_item(schedule.alphas_cumprod, t, x_t)
    total_variance = alpha_bar * std ** 2 + 1.0 - alpha_bar
    return (x_t - torch.sqrt(alpha_bar) * mean) * torch.sqrt(1.0 - alpha_bar) / total_variance


class GaussianOracle(EpsilonModel):
    """
    Bayes-optimal ε predictor for the Gaussian world.

    Class labels use the per-class posterior; the null token uses the
    posterior of the equal-weight mixture over all classes.
    """

    def __init__(self, means: torch.Tensor, std: float, schedule: NoiseSchedule):
        means = torch.as_tensor(means, dtype=torch.float64)
        if means.ndim != 2:
            raise ContractViolation(f"means must be (C, d), got {tuple(means.shape)}")
        self.means = means
        self.std = float(std)
        self.schedule = schedule
        self.num_labels = means.shape[0]

    def mixture_epsilon(self, x_t: torch.Tensor, t: Timestep) -> torch.Tensor:
        means = self.means.to(x_t.dtype)
        alpha_bar = _per_item(self.schedule.alphas_cumprod, t, x_t)
        total_variance = alpha_bar * self.std ** 2 + 1.0 - alpha_bar
        centred = x_t[:, None, :] - torch.sqrt(alpha_bar)[..., None] * means[None, :, :]
        log_weights = -centred.pow(2).sum(dim=-1) / (2.0 * total_variance)
        weights = torch.softmax(log_weights, dim=1)
        per_class = centred * (torch.sqrt(1.0 - alpha_bar) / total_variance)[..., None]
        return (weights[..., None] * per_class).sum(dim=1)

    def predict_epsilon(self, x_t, t, labels, **conditioning):
        if isinstance(t, torch.Tensor) and t.ndim == 0:
            t = int(t)
        null = labels == self.null_label
        class_ids = torch.where(null, torch.zeros_like(labels), labels)
        conditional = analytic_epsilon_gaussian(x_t, t, self.means.to(x_t.dtype)[class_ids], self.std, self.schedule)
        if not bool(null.any()):
            return conditional
        return torch.where(null[:, None], self.mixture_epsilon(x_t, t), conditional)
