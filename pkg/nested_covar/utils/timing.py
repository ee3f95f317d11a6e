"""
Wall-clock helpers for recorded phase timings
"""
import time

from ..config import settings


def recorded_elapsed(began: float) -> float:
    """
    Seconds since `began` (time.monotonic) as written to reports.
    Returns 0.0 under DETERMINISTIC_OUTPUT so reruns compare byte for byte.
    """
    if settings.DETERMINISTIC_OUTPUT:
        return 0.0
    return max(time.monotonic() - began, 0.0)
