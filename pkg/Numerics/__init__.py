"""
Dense tensor arithmetic lives in torch; this package adds seeded streams,
PSD linear algebra for the metrics and a gradient checker for the training code.
"""
from Numerics.gradcheck import grad_check
from Numerics.linalg import check_symmetric, matrix_sqrt_psd, trace_sqrt_product
from Numerics.rng import SeededRng, seeded_torch
