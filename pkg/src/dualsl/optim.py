from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def clip_by_norm(g: np.ndarray, c: float) -> np.ndarray:
    """Rescale ``g`` onto the L2 ball of radius ``c`` if it lies outside."""
    if not c > 0:
        raise ValueError("clip norm must be positive")
    norm = float(np.linalg.norm(g))
    if norm > c:
        return g * (c / norm)
    return g


class Optimizer:
    kind = "abstract"

    def __init__(self, lr: float):
        self.lr = float(lr)
        self.t = 0

    def step(self, params: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Update ``params`` in place from gradient ``g`` and return it."""
        if params.shape != g.shape:
            raise ValueError(f"shape mismatch: params {params.shape}, gradient {g.shape}")
        self.t += 1
        params -= self._update(g)
        return params

    def _update(self, g):
        raise NotImplementedError


class SGD(Optimizer):
    kind = "sgd"

    def _update(self, g):
        return self.lr * g


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = None
        self.v = None

    def _update(self, g):
        if self.m is None:
            self.m = np.zeros_like(g)
            self.v = np.zeros_like(g)
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Adadelta(Optimizer):
    """Zeiler's Adadelta; ``lr`` multiplies the unit-corrected step (1.0 is the original)."""

    kind = "adadelta"

    def __init__(self, lr=1.0, rho=0.95, eps=1e-6):
        super().__init__(lr)
        self.rho, self.eps = rho, eps
        self.sq_grad = None
        self.sq_update = None

    def _update(self, g):
        if self.sq_grad is None:
            self.sq_grad = np.zeros_like(g)
            self.sq_update = np.zeros_like(g)
        rho, eps = self.rho, self.eps
        self.sq_grad = rho * self.sq_grad + (1 - rho) * g * g
        delta = np.sqrt(self.sq_update + eps) / np.sqrt(self.sq_grad + eps) * g
        self.sq_update = rho * self.sq_update + (1 - rho) * delta * delta
        return self.lr * delta


OPTIMIZERS = {"sgd": SGD, "adam": Adam, "adadelta": Adadelta}


def make_optimizer(kind: str, lr: float) -> Optimizer:
    if kind not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {kind!r}")
    return OPTIMIZERS[kind](lr=lr)


@dataclass
class PlateauSchedule:
    """Halve the learning rate after ``patience`` evaluations without improvement."""

    lr: float
    patience: int = 5
    floor: float = 0.0
    higher_is_better: bool = False
    factor: float = 0.5
    best: float = field(default=math.nan)
    bad_evals: int = 0

    def improved(self, metric: float) -> bool:
        if math.isnan(self.best):
            return True
        return metric > self.best if self.higher_is_better else metric < self.best


def plateau_update(sched: PlateauSchedule, new_metric: float) -> float:
    if sched.improved(new_metric):
        sched.best = new_metric
        sched.bad_evals = 0
        return sched.lr
    sched.bad_evals += 1
    if sched.bad_evals >= sched.patience:
        sched.bad_evals = 0
        sched.lr = max(sched.floor, sched.lr * sched.factor)
    return sched.lr
