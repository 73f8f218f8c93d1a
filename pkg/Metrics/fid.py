import logging
from dataclasses import dataclass

import numpy as np
import torch

from Metrics.interfaces import FeatureExtractor
from Numerics.linalg import check_symmetric, trace_sqrt_product
from errors import ContractViolation

logger = logging.getLogger(__name__)

NEGATIVE_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class GaussianStats:
    """Mean and unbiased covariance of a feature set."""
    mean: np.ndarray
    cov: np.ndarray
    count: int

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def fit_stats(features) -> GaussianStats:
    """
    Fit a Gaussian to N x F features (covariance divisor N - 1).

    Raises:
        ContractViolation: If N <= F or the features are not a finite matrix
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ContractViolation(f"features must be N x F, got shape {features.shape}")
    count, dim = features.shape
    if count <= dim:
        raise ContractViolation(f"need more than {dim} samples to fit {dim}-dim statistics, got {count}")
    if not np.all(np.isfinite(features)):
        raise ContractViolation("features contain non-finite values")
    cov = np.atleast_2d(np.cov(features, rowvar=False, ddof=1))
    return GaussianStats(mean=features.mean(axis=0), cov=check_symmetric(cov, name="covariance"), count=count)


def fid(a: GaussianStats, b: GaussianStats) -> float:
    """
    Fréchet distance ‖μ_a - μ_b‖² + Tr(Σ_a + Σ_b - 2 (Σ_a Σ_b)^{1/2}).

    The cross term averages both argument orders so the result is exactly
    symmetric; tiny negative values from rounding are clamped to 0.
    """
    if a.dim != b.dim:
        raise ContractViolation(f"feature dimensions differ: {a.dim} vs {b.dim}")
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    cross = 0.5 * (trace_sqrt_product(a.cov, b.cov) + trace_sqrt_product(b.cov, a.cov))
    value = mean_term + float(np.trace(a.cov)) + float(np.trace(b.cov)) - 2.0 * cross
    if value < -NEGATIVE_FLOOR:
        logger.warning("FID evaluated to %.3e; clamping to 0", value)
    return max(value, 0.0)


def fid_between(extractor: FeatureExtractor, samples: torch.Tensor, reference: GaussianStats) -> float:
    return fid(fit_stats(extractor.features(samples)), reference)
