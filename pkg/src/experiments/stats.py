"""Summary statistics for campaign pass counts and measured quantities."""
import math

import numpy as np
from scipy import stats

from src.errors import DomainError


def wilson_interval(successes: int, trials: int,
                    confidence: float = 0.95) -> tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Args:
        successes: Number of passing trials
        trials: Total number of trials
        confidence: Two-sided confidence level

    Returns:
        tuple[float, float]: Interval clipped to [0, 1]
    """
    if trials <= 0:
        raise DomainError("Wilson interval needs at least one trial")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes={successes} outside [0, {trials}]")
    z = stats.norm.ppf(1 - (1 - confidence) / 2)
    phat = successes / trials
    denominator = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denominator
    half = z / denominator * math.sqrt(phat * (1 - phat) / trials
                                       + z * z / (4 * trials * trials))
    low = 0.0 if successes == 0 else max(0.0, centre - half)
    high = 1.0 if successes == trials else min(1.0, centre + half)
    return low, high


def quantity_aggregate(values) -> dict[str, float] | None:
    """min / median / max of the finite numeric values; None when there are none."""
    numbers = np.array([float(v) for v in values
                        if isinstance(v, (int, float)) and not isinstance(v, bool)
                        and math.isfinite(v)])
    if numbers.size == 0:
        return None
    return {"min": float(numbers.min()), "median": float(np.median(numbers)),
            "max": float(numbers.max()), "count": int(numbers.size)}
