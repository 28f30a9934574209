"""Generalized harmonic numbers and factorial helpers."""

from __future__ import annotations

import math
import warnings
from functools import lru_cache

# float factorials lose integer exactness beyond this point
FACTORIAL_EXACT_MAX = 25


@lru_cache(maxsize=None)
def harmonic(n: int, m: int = 1) -> float:
    """H_{n,m} = sum_{k=1..n} 1/k^m, summed with ``math.fsum``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if m not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {m}")
    return math.fsum(1.0 / k**m for k in range(1, n + 1))


def float_factorial(n: int) -> float:
    if n < 0:
        raise ValueError("negative factorial")
    try:
        value = float(math.factorial(n))
    except OverflowError:
        raise OverflowError(f"{n}! is not representable as a float") from None
    if n > FACTORIAL_EXACT_MAX:
        warnings.warn(f"{n}! rounded to float (relative error up to 1e-16)", RuntimeWarning, stacklevel=2)
    return value
