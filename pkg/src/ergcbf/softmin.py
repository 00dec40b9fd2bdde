"""Smooth minimum via a negative scaled log-sum-exp.

softmin_beta(s) = -(1/beta) * log(sum_i exp(-beta * s_i))

The sum is evaluated after shifting by min(s), so no exp argument is ever
positive and the result stays finite for inputs anywhere in [-700, 700] and
far beyond.  The companion weights

    w_i = exp(-beta * s_i) / sum_j exp(-beta * s_j)

form a convex combination (w_i >= 0, sum w_i = 1) and are exactly the
gradient of the softmin with respect to the inputs, which is what the
barrier assembly relies on.

Bounds: min(s) - log(n)/beta <= softmin_beta(s) <= min(s).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class SoftminResult:
    """Value and input weights of one softmin evaluation."""

    value: float
    weights: Array


def softmin(values, beta: float) -> SoftminResult:
    """Smooth minimum of a non-empty 1-D collection.

    Parameters
    ----------
    values : array_like, shape (n,)
        Finite inputs, n >= 1.
    beta : float
        Sharpness > 0.  Larger beta hugs the true minimum more closely.
    """
    s = np.asarray(values, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("softmin expects a non-empty 1-D array")
    if not np.all(np.isfinite(s)):
        raise ValueError("softmin inputs must be finite")
    if not (beta > 0.0) or not np.isfinite(beta):
        raise ValueError("beta must be positive and finite")

    m = float(s.min())
    e = np.exp(-beta * (s - m))
    z = float(e.sum())
    value = m - np.log(z) / beta
    return SoftminResult(value=value, weights=e / z)


def softmin_value(values, beta: float) -> float:
    """Just the smooth minimum, when the weights are not needed."""
    return softmin(values, beta).value
