"""Central finite differences for checking hand-written gradients."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..seqcore import Item
from .base import ConditionalModel


def central_difference(fn: Callable[[np.ndarray], float], theta, h: float = 1e-5) -> np.ndarray:
    """``(fn(theta + h e_i) - fn(theta - h e_i)) / 2h`` for every coordinate."""
    if not h > 0:
        raise ValueError("step size h must be positive")
    theta = np.array(theta, dtype=float, ndmin=1)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + h
        up = fn(theta)
        theta[i] = orig - h
        down = fn(theta)
        theta[i] = orig
        if not (math.isfinite(up) and math.isfinite(down)):
            raise FloatingPointError("numeric overflow")
        grad[i] = (up - down) / (2 * h)
    return grad


def finite_diff_grad(model: ConditionalModel, x: Item, y: Item, h: float = 1e-5) -> np.ndarray:
    probe = model.clone()

    def fn(theta):
        probe.params.values[...] = theta
        return probe.log_prob(x, y)

    return central_difference(fn, model.params.values.copy(), h)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``max|a - n| / (1 + max|n|)``."""
    return float(np.max(np.abs(analytic - numeric)) / (1.0 + np.max(np.abs(numeric))))


def check_model(model: ConditionalModel, x: Item, y: Item, h: float = 1e-5) -> float:
    return relative_error(model.grad_log_prob(x, y), finite_diff_grad(model, x, y, h))
