import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import torch
from tqdm import tqdm

import settings
from Diffusion.config import SamplerConfig
from Diffusion.interfaces import EpsilonModel
from Diffusion.schedule import NoiseSchedule
from Numerics.rng import SeededRng
from errors import ContractViolation

logger = logging.getLogger(__name__)


def guided_epsilon(model: EpsilonModel, x_t: torch.Tensor, t: torch.Tensor, labels: torch.Tensor,
                   w: float, **conditioning: torch.Tensor) -> torch.Tensor:
    """
    Classifier-free guidance ε̂ = ε_null + w · (ε_class - ε_null).

    Always evaluates the model twice; w = 1 returns ε_class unchanged.
    """
    if w < 1.0:
        raise ContractViolation(f"guidance weight must be >= 1, got {w}")
    eps_class = model.predict_epsilon(x_t, t, labels, **conditioning)
    eps_null = model.predict_epsilon(x_t, t, torch.full_like(labels, model.null_label), **conditioning)
    if w == 1.0:
        return eps_class
    return eps_null + w * (eps_class - eps_null)


def predict_x0(x_t: torch.Tensor, t: int, eps: torch.Tensor, schedule: NoiseSchedule,
               clip: bool = True, threshold: float = 1.0) -> torch.Tensor:
    alpha_bar = schedule.alpha_bar(t)
    x0 = (x_t - math.sqrt(1.0 - alpha_bar) * eps) / math.sqrt(alpha_bar)
    return x0.clamp(-threshold, threshold) if clip else x0


def ddpm_step(x_t: torch.Tensor, t: int, eps: torch.Tensor, schedule: NoiseSchedule, v: float,
              generator: Optional[torch.Generator] = None, clip: bool = True, threshold: float = 1.0,
              noise: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    One ancestral step x_t -> x_{t-1}.

    The mean is the posterior mean of q(x_{t-1} | x_t, x̂0) and the variance
    exp(v · log β_t + (1 - v) · log β̃_t). No noise is added at t = 1.

    Args:
        x_t: Current batch
        t: Current timestep in 1..T
        eps: Predicted noise
        schedule: Schedule the step runs on
        v: Log-variance mixing coefficient in [0, 1]
        generator: Source of the noise z
        clip: Clip x̂0 to [-threshold, threshold] before forming the mean
        threshold: Static clip threshold
        noise: Explicit z, overriding the generator

    Raises:
        ContractViolation: If t or v is out of range
    """
    schedule.check_timestep(t)
    log_variance = schedule.log_variance(t, v)
    x0 = predict_x0(x_t, t, eps, schedule, clip, threshold)
    mean = float(schedule.posterior_mean_coef1[t]) * x0 + float(schedule.posterior_mean_coef2[t]) * x_t
    if t == 1:
        return mean
    if noise is None:
        noise = torch.randn(x_t.shape, generator=generator, dtype=x_t.dtype)
    return mean + math.exp(0.5 * log_variance) * noise


def ddim_step(x_t: torch.Tensor, t: int, t_prev: int, eps: torch.Tensor, schedule: NoiseSchedule,
              clip: bool = True, threshold: float = 1.0) -> torch.Tensor:
    """Deterministic (η = 0) step x_t -> x_{t_prev}; t_prev = 0 returns x̂0."""
    if not 0 <= t_prev < t <= schedule.T:
        raise ContractViolation(f"need 0 <= t_prev < t <= {schedule.T}, got t={t}, t_prev={t_prev}")
    x0 = predict_x0(x_t, t, eps, schedule, clip, threshold)
    if t_prev == 0:
        return x0
    alpha_bar_prev = schedule.alpha_bar(t_prev)
    return math.sqrt(alpha_bar_prev) * x0 + math.sqrt(1.0 - alpha_bar_prev) * eps


def timestep_subsequence(T: int, steps: int) -> List[int]:
    """Uniformly strided increasing timesteps from 1 to T inclusive."""
    if not 1 <= steps <= T:
        raise ContractViolation(f"steps must lie in [1, {T}], got {steps}")
    if steps == T:
        return list(range(1, T + 1))
    if steps == 1:
        return [T]
    return sorted(set(int(step) for step in np.round(np.linspace(1, T, steps)).astype(np.int64)))


def sample(model: EpsilonModel, labels: torch.Tensor, schedule: NoiseSchedule, config: SamplerConfig,
           rng: SeededRng, sample_shape: Sequence[int], conditional_only: bool = False,
           dtype: torch.dtype = torch.float32, progress: Optional[bool] = None,
           **conditioning: torch.Tensor) -> torch.Tensor:
    """
    Run the reverse chain from x_T ~ N(0, I) down to x0.

    Args:
        model: ε predictor; called with the original timesteps of the schedule
        labels: One class id per output item
        schedule: Schedule the model was trained with
        config: Sampler settings
        rng: Stream for the initial noise and every step's noise
        sample_shape: Shape of one item
        conditional_only: Skip the null branch (one model call per step)
        dtype: Floating dtype of the chain
        progress: Show a progress bar; defaults to settings.PROGRESS
        **conditioning: Extra model inputs, passed through unchanged

    Returns:
        Samples, shape (len(labels), *sample_shape)
    """
    steps = config.steps or schedule.T
    timesteps = timestep_subsequence(schedule.T, steps)
    generator = rng.generator()
    x = torch.randn((len(labels), *sample_shape), generator=generator, dtype=dtype)
    show = settings.PROGRESS if progress is None else progress

    def epsilon(x_t: torch.Tensor, t: int) -> torch.Tensor:
        t_batch = torch.full((len(labels),), t, dtype=torch.int64)
        if conditional_only:
            return model.predict_epsilon(x_t, t_batch, labels, **conditioning)
        return guided_epsilon(model, x_t, t_batch, labels, config.guidance_weight, **conditioning)

    logger.debug("Sampling %d items with %s over %d steps", len(labels), config.kind, len(timesteps))
    with torch.no_grad():
        if config.kind == "ddpm":
            step_schedule = schedule if len(timesteps) == schedule.T else schedule.respace(timesteps)[0]
            for i in tqdm(range(len(timesteps), 0, -1), desc="ddpm", disable=not show, leave=False):
                eps = epsilon(x, timesteps[i - 1])
                x = ddpm_step(x, i, eps, step_schedule, config.log_variance, generator,
                              clip=config.clip, threshold=config.clip_threshold)
        else:
            for i in tqdm(range(len(timesteps) - 1, -1, -1), desc="ddim", disable=not show, leave=False):
                t = timesteps[i]
                t_prev = timesteps[i - 1] if i > 0 else 0
                x = ddim_step(x, t, t_prev, epsilon(x, t), schedule,
                              clip=config.clip, threshold=config.clip_threshold)
    if config.clip:
        x = x.clamp(-config.clip_threshold, config.clip_threshold)
    return x
