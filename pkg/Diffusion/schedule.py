import math
from typing import Any, Dict, List, Literal, Sequence, Tuple, Union

import torch

from errors import ContractViolation

ScheduleKind = Literal["linear", "cosine"]

COSINE_OFFSET = 0.008
MAX_BETA = 0.999


class NoiseSchedule:
    """
    Discrete forward-process schedule indexed t = 1..T.

    Every per-step table has T + 1 entries; entry 0 is the t = 0 convention
    (beta 0, alpha_bar 1, posterior variance 0).

    Attributes:
        betas: β_t
        alphas: α_t = 1 - β_t
        alphas_cumprod: ᾱ_t = Π_{s<=t} α_s
        posterior_variance: β̃_t = (1 - ᾱ_{t-1}) / (1 - ᾱ_t) · β_t
    """

    def __init__(self, betas: Union[Sequence[float], torch.Tensor], kind: str = "explicit"):
        betas = torch.as_tensor(betas, dtype=torch.float64).flatten()
        if betas.numel() < 1:
            raise ContractViolation("a schedule needs at least one step")
        if not torch.all((betas > 0) & (betas < 1)):
            raise ContractViolation("every beta must lie in (0, 1)")
        self.kind = kind
        self.betas = torch.cat([torch.zeros(1, dtype=torch.float64), betas])
        self.alphas = 1.0 - self.betas
        self.alphas_cumprod = torch.cumprod(self.alphas, dim=0)
        if not torch.all(self.alphas_cumprod[1:] < self.alphas_cumprod[:-1]):
            raise ContractViolation("alpha_bar must be strictly decreasing")
        previous = self.alphas_cumprod[:-1]
        current = self.alphas_cumprod[1:]
        posterior = (1.0 - previous) / (1.0 - current) * betas
        self.posterior_variance = torch.cat([torch.zeros(1, dtype=torch.float64), posterior])
        self.posterior_mean_coef1 = torch.cat([
            torch.zeros(1, dtype=torch.float64), betas * torch.sqrt(previous) / (1.0 - current)])
        self.posterior_mean_coef2 = torch.cat([
            torch.zeros(1, dtype=torch.float64), (1.0 - previous) * torch.sqrt(self.alphas[1:]) / (1.0 - current)])

    @classmethod
    def from_betas(cls, betas: Union[Sequence[float], torch.Tensor]) -> "NoiseSchedule":
        return cls(betas, kind="explicit")

    @property
    def T(self) -> int:
        return self.betas.numel() - 1

    def check_timestep(self, t: int, allow_zero: bool = False) -> None:
        low = 0 if allow_zero else 1
        if not low <= int(t) <= self.T:
            raise ContractViolation(f"timestep {t} outside [{low}, {self.T}]")

    def alpha_bar(self, t: int) -> float:
        return float(self.alphas_cumprod[t])

    def log_variance(self, t: int, v: float) -> float:
        """
        log σ_t² = v · log β_t + (1 - v) · log β̃_t.

        β̃_1 is zero, so at t = 1 the lower bound is replaced by β̃_2 (or β_1
        for a one-step schedule); the sampler adds no noise at t = 1 anyway.
        """
        self.check_timestep(t)
        if not 0.0 <= v <= 1.0:
            raise ContractViolation(f"log-variance coefficient must be in [0, 1], got {v}")
        if t == 1:
            lower = float(self.posterior_variance[2]) if self.T >= 2 else float(self.betas[1])
        else:
            lower = float(self.posterior_variance[t])
        return v * math.log(float(self.betas[t])) + (1.0 - v) * math.log(lower)

    def respace(self, timesteps: Sequence[int]) -> Tuple["NoiseSchedule", List[int]]:
        """
        Schedule over a strictly increasing subsequence τ_1 < ... < τ_k of 1..T.

        The respaced schedule keeps ᾱ at the kept timesteps:
        β_i = 1 - ᾱ_{τ_i} / ᾱ_{τ_{i-1}} with ᾱ_{τ_0} = 1.

        Returns:
            The respaced schedule and the map from its step i to the original τ_i
        """
        steps = list(timesteps)
        if not steps or any(b <= a for a, b in zip(steps, steps[1:])):
            raise ContractViolation("respacing timesteps must be strictly increasing and non-empty")
        self.check_timestep(steps[0])
        self.check_timestep(steps[-1])
        kept = self.alphas_cumprod[torch.tensor(steps)]
        previous = torch.cat([torch.ones(1, dtype=torch.float64), kept[:-1]])
        return NoiseSchedule(1.0 - kept / previous, kind=f"{self.kind}-respaced"), steps

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "betas": self.betas[1:].tolist()}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "NoiseSchedule":
        return cls(payload["betas"], kind=payload.get("kind", "explicit"))


def build_schedule(kind: ScheduleKind, T: int, beta_start: float = 1e-4, beta_end: float = 0.02,
                   offset: float = COSINE_OFFSET, max_beta: float = MAX_BETA) -> NoiseSchedule:
    """
    Build a named schedule with T steps.

    linear: β interpolates (beta_start, beta_end) scaled by 1000 / T.
    cosine: ᾱ_t = cos²((t/T + s)/(1 + s) · π/2) / cos²(s/(1 + s) · π/2), s = offset.
    Betas are capped at max_beta.

    Raises:
        ContractViolation: If T < 1 or the kind is unknown
    """
    if T < 1:
        raise ContractViolation(f"T must be >= 1, got {T}")
    if kind == "linear":
        scale = 1000.0 / T
        betas = torch.linspace(scale * beta_start, scale * beta_end, T, dtype=torch.float64)
    elif kind == "cosine":
        def f(t: float) -> float:
            return math.cos((t / T + offset) / (1.0 + offset) * math.pi / 2.0) ** 2
        betas = torch.tensor([1.0 - f(t) / f(t - 1) for t in range(1, T + 1)], dtype=torch.float64)
    else:
        raise ContractViolation(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(betas.clamp(max=max_beta), kind=kind)
