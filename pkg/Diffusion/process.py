from typing import Tuple, Union

import torch

from Diffusion.interfaces import EpsilonModel
from Diffusion.schedule import NoiseSchedule
from Numerics.rng import SeededRng
from errors import ContractViolation, DivergenceError

Timestep = Union[int, torch.Tensor]


def _per_item(values: torch.Tensor, t: Timestep, like: torch.Tensor) -> torch.Tensor:
    """Gather a schedule table at t and shape it to broadcast against a batch."""
    if isinstance(t, torch.Tensor) and t.ndim > 0:
        picked = values[t.long()]
        return picked.reshape(-1, *([1] * (like.ndim - 1))).to(like.dtype)
    return values[int(t)].to(like.dtype)


def _check_range(schedule: NoiseSchedule, t: Timestep, low: int) -> None:
    steps = t if isinstance(t, torch.Tensor) else torch.tensor([int(t)])
    if steps.numel() and (int(steps.min()) < low or int(steps.max()) > schedule.T):
        raise ContractViolation(f"timesteps must lie in [{low}, {schedule.T}]")


def forward_sample(x0: torch.Tensor, t: Timestep, eps: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """
    x_t = √ᾱ_t · x0 + √(1 - ᾱ_t) · ε.

    t may be one integer or a tensor with one timestep per item; t = 0
    returns x0 unchanged.
    """
    if eps.shape != x0.shape:
        raise ContractViolation(f"noise shape {tuple(eps.shape)} does not match {tuple(x0.shape)}")
    _check_range(schedule, t, 0)
    alpha_bar = _per_item(schedule.alphas_cumprod, t, x0)
    return torch.sqrt(alpha_bar) * x0 + torch.sqrt(1.0 - alpha_bar) * eps


def forward_sample_between(x_s: torch.Tensor, s: int, t: int, eps: torch.Tensor,
                           schedule: NoiseSchedule) -> torch.Tensor:
    """Sample q(x_t | x_s) for s <= t: ᾱ_{t|s} = ᾱ_t / ᾱ_s."""
    if eps.shape != x_s.shape:
        raise ContractViolation(f"noise shape {tuple(eps.shape)} does not match {tuple(x_s.shape)}")
    if not 0 <= s <= t <= schedule.T:
        raise ContractViolation(f"need 0 <= s <= t <= {schedule.T}, got s={s}, t={t}")
    ratio = float(schedule.alphas_cumprod[t] / schedule.alphas_cumprod[s])
    return ratio ** 0.5 * x_s + (1.0 - ratio) ** 0.5 * eps


def diffusion_loss(model: EpsilonModel, x0: torch.Tensor, labels: torch.Tensor, schedule: NoiseSchedule,
                   cond_dropout_p: float, generator: torch.Generator, **conditioning: torch.Tensor) -> torch.Tensor:
    """
    Differentiable ε-prediction loss mean_i ‖ε_i - ε_θ(x_t, t, class_i)‖².

    Draw order per call: timesteps, then noise, then the dropout mask.

    Raises:
        ContractViolation: If cond_dropout_p is outside [0, 1]
        DivergenceError: If the loss is not finite
    """
    if not 0.0 <= cond_dropout_p <= 1.0:
        raise ContractViolation(f"condition dropout must be in [0, 1], got {cond_dropout_p}")
    count = x0.shape[0]
    t = torch.randint(1, schedule.T + 1, (count,), generator=generator)
    eps = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
    dropped = torch.rand(count, generator=generator) < cond_dropout_p
    labels = torch.where(dropped, torch.full_like(labels, model.null_label), labels)
    x_t = forward_sample(x0, t, eps, schedule)
    prediction = model.predict_epsilon(x_t, t, labels, **conditioning)
    loss = (eps - prediction).pow(2).flatten(1).sum(dim=1).mean()
    if not torch.isfinite(loss):
        raise DivergenceError("non-finite diffusion loss")
    return loss


def training_loss(model: EpsilonModel, batch: Tuple[torch.Tensor, torch.Tensor], schedule: NoiseSchedule,
                  cond_dropout_p: float, rng: SeededRng,
                  **conditioning: torch.Tensor) -> Tuple[float, Tuple[torch.Tensor, ...]]:
    """
    Loss value and parameter gradients for one batch.

    Args:
        model: A network-backed ε model
        batch: (samples, labels)
        schedule: Forward-process schedule
        cond_dropout_p: Probability of replacing a label by the null token
        rng: Stream for timesteps, noise and dropout

    Returns:
        (loss, gradients in model.parameters() order)
    """
    samples, labels = batch
    params = [param for param in model.parameters() if param.requires_grad]
    loss = diffusion_loss(model, samples, labels, schedule, cond_dropout_p, rng.generator(), **conditioning)
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    grads = tuple(torch.zeros_like(p) if g is None else g for p, g in zip(params, grads))
    return float(loss.detach()), grads
