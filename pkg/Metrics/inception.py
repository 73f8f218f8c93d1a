from typing import Tuple

import numpy as np
from scipy.special import xlogy

from errors import ContractViolation

ROW_SUM_TOLERANCE = 1e-6
DEFAULT_SPLITS = 5


def inception_score(probabilities, splits: int = DEFAULT_SPLITS) -> Tuple[float, float]:
    """
    Inception Score exp(E_x KL(p(y|x) ‖ p(y))) per split.

    Args:
        probabilities: N x C class posteriors, rows summing to 1
        splits: Number of equal, contiguous splits

    Returns:
        (mean, std) of the per-split scores, each clipped into [1, C]

    Raises:
        ContractViolation: If a row is not a distribution or N is not divisible by splits
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.ndim != 2 or probabilities.shape[0] == 0:
        raise ContractViolation(f"probabilities must be a non-empty N x C matrix, got shape {probabilities.shape}")
    count, classes = probabilities.shape
    if splits < 1 or count % splits:
        raise ContractViolation(f"{count} rows cannot be divided into {splits} equal splits")
    if np.any(probabilities < 0) or not np.all(np.isfinite(probabilities)):
        raise ContractViolation("probabilities must be finite and non-negative")
    if np.max(np.abs(probabilities.sum(axis=1) - 1.0)) > ROW_SUM_TOLERANCE:
        raise ContractViolation("every probability row must sum to 1")

    scores = []
    for part in np.split(probabilities, splits):
        marginal = part.mean(axis=0, keepdims=True)
        kl = np.sum(xlogy(part, part) - xlogy(part, marginal), axis=1)
        scores.append(float(np.clip(np.exp(np.mean(kl)), 1.0, classes)))
    return float(np.mean(scores)), float(np.std(scores))
