import logging

import numpy as np
from scipy import linalg

from errors import ContractViolation

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-8
EIGEN_CLAMP_TOLERANCE = 1e-10


def _as_square(matrix, name: str = "matrix") -> np.ndarray:
    M = np.asarray(matrix, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ContractViolation(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ContractViolation(f"{name} contains non-finite values")
    return M


def check_symmetric(matrix, tol: float = SYMMETRY_TOLERANCE, name: str = "matrix") -> np.ndarray:
    """
    Validate that a matrix is square and symmetric within a tolerance.

    Args:
        matrix: Array-like square matrix
        tol: Allowed asymmetry relative to max(1, largest absolute entry)

    Returns:
        The exactly symmetrised float64 matrix
    """
    M = _as_square(matrix, name)
    scale = max(1.0, float(np.max(np.abs(M))))
    asymmetry = float(np.max(np.abs(M - M.T)))
    if asymmetry > tol * scale:
        raise ContractViolation(f"{name} is not symmetric (max asymmetry {asymmetry:.3e})")
    return (M + M.T) / 2.0


def psd_eigh(matrix, name: str = "matrix"):
    """Eigendecomposition of a symmetric PSD matrix with negative eigenvalues clamped to 0."""
    M = check_symmetric(matrix, name=name)
    eigenvalues, eigenvectors = linalg.eigh(M)
    floor = EIGEN_CLAMP_TOLERANCE * max(1.0, float(np.max(np.abs(eigenvalues))))
    if eigenvalues[0] < -floor:
        logger.warning("%s has eigenvalue %.3e below zero; clamping", name, eigenvalues[0])
    return np.clip(eigenvalues, 0.0, None), eigenvectors


def matrix_sqrt_psd(matrix) -> np.ndarray:
    """
    Principal square root of a symmetric positive semi-definite matrix.

    Args:
        matrix: Symmetric PSD matrix (asymmetry up to 1e-8 is tolerated)

    Returns:
        Symmetric PSD S with S @ S ≈ matrix

    Raises:
        ContractViolation: If the input is not square or not symmetric
    """
    eigenvalues, eigenvectors = psd_eigh(matrix)
    root = (eigenvectors * np.sqrt(eigenvalues)) @ eigenvectors.T
    return (root + root.T) / 2.0


def trace_sqrt_product(a, b) -> float:
    """
    Tr((A B)^{1/2}) for symmetric PSD A and B.

    Evaluated as Tr((√A B √A)^{1/2}) so that every eigendecomposition is of a
    symmetric PSD matrix.
    """
    root_a = matrix_sqrt_psd(a)
    b = check_symmetric(b, name="second matrix")
    if root_a.shape != b.shape:
        raise ContractViolation(f"shape mismatch: {root_a.shape} vs {b.shape}")
    inner = root_a @ b @ root_a
    eigenvalues, _ = psd_eigh((inner + inner.T) / 2.0, name="product")
    return float(np.sum(np.sqrt(eigenvalues)))
