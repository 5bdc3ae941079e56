"""The probabilistic-duality penalty and its chain-rule gradients.

For one pair ``(x, y)`` the gap is::

    delta = log P^(x) + log P(y|x; theta_xy) - log P^(y) - log P(x|y; theta_yx)

and the penalty is ``delta ** 2``. It vanishes exactly when both
factorizations of the joint agree under the supplied marginals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seqcore import Item


class DegenerateLogProb(ValueError):
    pass


@dataclass(frozen=True)
class DualityTerm:
    delta: float
    loss: float
    lambda_xy: float = 0.0
    lambda_yx: float = 0.0


def duality_term(log_px: float, log_p_y_given_x: float, log_py: float, log_p_x_given_y: float,
                 lambda_xy: float = 0.0, lambda_yx: float = 0.0) -> DualityTerm:
    vals = (log_px, log_p_y_given_x, log_py, log_p_x_given_y)
    if not all(math.isfinite(v) for v in vals):
        raise DegenerateLogProb(f"degenerate log-probability in {vals}")
    delta = (log_px + log_p_y_given_x) - (log_py + log_p_x_given_y)
    return DualityTerm(delta, delta * delta, lambda_xy, lambda_yx)


def duality_grads(term: DualityTerm, grad_primal: np.ndarray, grad_dual: np.ndarray):
    """Gradients of ``delta**2`` w.r.t. each model's parameters, unweighted.

    ``grad_primal``/``grad_dual`` are the log-likelihood gradients of the two
    models on the same pair; each is scaled by ``+2 delta`` / ``-2 delta``.
    """
    two_delta = 2.0 * term.delta
    return two_delta * np.asarray(grad_primal), -two_delta * np.asarray(grad_dual)


@dataclass(frozen=True)
class LambdaRule:
    """Penalty weights, either fixed or scaled by the input length.

    ``length_scaled`` gives ``((c_xy / len(x))**2, (c_yx / len(x))**2)``;
    ``divisor`` pins ``len(x)`` to a constant (e.g. a fixed pixel count).
    """

    mode: str = "constant"
    c_xy: float = 0.01
    c_yx: float = 0.01
    divisor: int | None = None

    def __post_init__(self):
        if self.mode not in ("constant", "length_scaled"):
            raise ValueError(f"unknown lambda mode {self.mode!r}")
        if self.c_xy < 0 or self.c_yx < 0:
            raise ValueError("lambda constants must be non-negative")

    @property
    def is_zero(self) -> bool:
        return self.c_xy == 0 and self.c_yx == 0


def lambda_for(rule: LambdaRule, x: Item) -> tuple[float, float]:
    if rule.mode == "constant":
        return rule.c_xy, rule.c_yx
    length = rule.divisor if rule.divisor is not None else len(x)
    if length < 1:
        raise ValueError("input length must be >= 1")
    return (rule.c_xy / length) ** 2, (rule.c_yx / length) ** 2
