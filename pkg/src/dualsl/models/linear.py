from __future__ import annotations

import numpy as np

from ..seqcore import Alphabet, Item, log_softmax
from .base import EnumerableModel, ParamVector


class LinearSoftmaxModel(EnumerableModel):
    """Softmax classifier over bag-of-tokens counts of the input sequence."""

    family = "linear"

    def __init__(self, input_alphabet: Alphabet, output_alphabet: Alphabet, params: ParamVector | None = None):
        if params is None:
            params = ParamVector([
                ("weight", (input_alphabet.size, output_alphabet.size), "weight"),
                ("bias", (output_alphabet.size,), "bias"),
            ])
        super().__init__(input_alphabet, output_alphabet, params)

    def hyperparams(self):
        return {"feature_dim": self.input_alphabet.size}

    def features(self, x: Item) -> np.ndarray:
        return np.bincount(np.asarray(x.tokens), minlength=self.input_alphabet.size).astype(float)

    def scores(self, x: Item) -> np.ndarray:
        return self.features(x) @ self.params["weight"] + self.params["bias"]

    def output_log_probs(self, x):
        self.check(x)
        return log_softmax(self.scores(x))

    def log_prob_and_grad(self, x, y, need_grad=True):
        self.check(x, y)
        feats = self.features(x)
        lp = log_softmax(feats @ self.params["weight"] + self.params["bias"])
        value = float(lp[y.label])
        if not need_grad:
            return value, None
        delta = -np.exp(lp)
        delta[y.label] += 1.0
        grad = self.params.zeros_like()
        self.params.view(grad, "weight")[...] = np.outer(feats, delta)
        self.params.view(grad, "bias")[...] = delta
        return value, grad
