import math
from typing import List, Literal, Sequence, Tuple

from errors import ContractViolation

Direction = Literal["min", "max"]


def _dominates(p: Sequence[float], q: Sequence[float], signs: Sequence[float]) -> bool:
    at_least = all(s * a <= s * b for a, b, s in zip(p, q, signs))
    strictly = any(s * a < s * b for a, b, s in zip(p, q, signs))
    return at_least and strictly


def pareto_indices(points: Sequence[Sequence[float]], directions: Sequence[Direction] = ("min", "max")) -> List[int]:
    """Indices of the non-dominated points, in input order."""
    if not points:
        raise ContractViolation("pareto frontier of an empty set")
    if any(d not in ("min", "max") for d in directions):
        raise ContractViolation(f"directions must be 'min' or 'max', got {directions}")
    signs = [1.0 if d == "min" else -1.0 for d in directions]
    if any(len(point) != len(signs) for point in points):
        raise ContractViolation(f"every point needs {len(signs)} coordinates")
    bad = [i for i, point in enumerate(points) if not all(math.isfinite(value) for value in point)]
    if bad:
        raise ContractViolation(f"points {bad} have non-finite coordinates")
    return [
        i for i, p in enumerate(points)
        if not any(_dominates(q, p, signs) for q in points)
    ]


def pareto_frontier(points: Sequence[Tuple[float, ...]],
                    directions: Sequence[Direction] = ("min", "max")) -> List[Tuple[float, ...]]:
    """
    Non-dominated subset of points; duplicates of a frontier point are all kept.

    Args:
        points: Objective tuples
        directions: Per objective, whether lower ("min") or higher ("max") is better

    Raises:
        ContractViolation: On empty input or a non-finite coordinate
    """
    return [tuple(points[i]) for i in pareto_indices(points, directions)]
