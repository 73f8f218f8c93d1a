from typing import Callable, Sequence

import torch

from errors import ContractViolation

RELATIVE_FLOOR = 1e-12


def grad_check(loss_fn: Callable[[], torch.Tensor], params: Sequence[torch.Tensor], eps: float = 1e-6) -> float:
    """
    Compare reverse-mode gradients against central differences.

    loss_fn is called repeatedly and must be deterministic: any randomness it
    uses has to be re-seeded on every call.

    Args:
        loss_fn: Zero-argument callable returning a scalar tensor
        params: Leaf tensors (requires_grad=True) the loss depends on
        eps: Central-difference step, in (0, 1e-2]

    Returns:
        Max over coordinates of |analytic - numeric| / (|numeric| + 1e-12)

    Raises:
        ContractViolation: If eps is out of range or the loss is not a finite scalar
    """
    if not 0.0 < eps <= 1e-2:
        raise ContractViolation(f"eps must be in (0, 1e-2], got {eps}")
    params = list(params)

    loss = loss_fn()
    if loss.numel() != 1:
        raise ContractViolation(f"loss must be scalar, got shape {tuple(loss.shape)}")
    if not torch.isfinite(loss).all():
        raise ContractViolation("loss is not finite")
    analytic = torch.autograd.grad(loss, params, allow_unused=True)

    worst = 0.0
    with torch.no_grad():
        for param, grad in zip(params, analytic):
            grad = torch.zeros_like(param) if grad is None else grad
            flat = param.data.view(-1)
            flat_grad = grad.reshape(-1)
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + eps
                upper = loss_fn().item()
                flat[i] = original - eps
                lower = loss_fn().item()
                flat[i] = original
                numeric = (upper - lower) / (2.0 * eps)
                error = abs(flat_grad[i].item() - numeric) / (abs(numeric) + RELATIVE_FLOOR)
                worst = max(worst, error)
    return worst
