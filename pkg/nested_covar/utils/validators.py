"""
Validators for numerical inputs
"""
import math
from typing import Optional, Tuple

import numpy as np


def validate_level(p: float, name: str = "level") -> Tuple[bool, Optional[str]]:
    """
    Validate a probability level in the open unit interval
    Returns: (is_valid, error_message)
    """
    if p is None or not math.isfinite(p):
        return False, f"{name} must be a finite number"

    if not 0.0 < p < 1.0:
        return False, f"{name} must lie in (0, 1), got {p}"

    return True, None


def validate_count(value: int, name: str, minimum: int = 1) -> Tuple[bool, Optional[str]]:
    """
    Validate an integer count
    Returns: (is_valid, error_message)
    """
    if int(value) != value:
        return False, f"{name} must be an integer"

    if value < minimum:
        return False, f"{name} must be at least {minimum}, got {value}"

    return True, None


def validate_symmetric(matrix: np.ndarray, tol: float = 1e-12) -> Tuple[bool, Optional[str]]:
    """
    Validate a square symmetric matrix (relative tolerance on the largest entry)
    Returns: (is_valid, error_message)
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False, f"matrix must be square, got shape {matrix.shape}"

    if not np.all(np.isfinite(matrix)):
        return False, "matrix contains non-finite entries"

    scale = max(float(np.max(np.abs(matrix))), 1.0)
    if np.max(np.abs(matrix - matrix.T)) > tol * scale:
        return False, "matrix is not symmetric"

    return True, None


def validate_finite(array: np.ndarray, name: str) -> Tuple[bool, Optional[str]]:
    """
    Validate that an array has no NaN or infinite entries
    Returns: (is_valid, error_message)
    """
    if not np.all(np.isfinite(np.asarray(array, dtype=float))):
        return False, f"{name} contains non-finite entries"

    return True, None
