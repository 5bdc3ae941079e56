from __future__ import annotations

import numpy as np

from ..seqcore import Alphabet, Item, log_softmax
from .base import EnumerableModel, ParamVector


class TabularSoftmaxModel(EnumerableModel):
    """One free logit per (input, output) pair; each row is a softmax.

    Inputs and outputs are length-1 items, so the whole conditional is a
    ``(n_in, n_out)`` table and every oracle can enumerate it.
    """

    family = "tabular"

    def __init__(self, input_alphabet: Alphabet, output_alphabet: Alphabet, params: ParamVector | None = None):
        if params is None:
            params = ParamVector([("logits", (input_alphabet.size, output_alphabet.size), "bias")])
        super().__init__(input_alphabet, output_alphabet, params)

    @classmethod
    def from_conditional(cls, table: np.ndarray) -> "TabularSoftmaxModel":
        """Model whose conditional equals the row-stochastic ``table`` exactly."""
        table = np.asarray(table, dtype=float)
        model = cls(Alphabet(table.shape[0]), Alphabet(table.shape[1]))
        with np.errstate(divide="ignore"):  # zero cells become -inf logits
            model.logits[...] = np.log(table)
        return model

    @property
    def logits(self) -> np.ndarray:
        return self.params["logits"]

    def conditional_table(self) -> np.ndarray:
        return np.exp(log_softmax(self.logits))

    def output_log_probs(self, x: Item) -> np.ndarray:
        self.check(x)
        return log_softmax(self.logits[x.label])

    def log_prob_and_grad(self, x, y, need_grad=True):
        self.check(x, y)
        row = x.label
        lp = log_softmax(self.logits[row])
        value = float(lp[y.label])
        if not need_grad:
            return value, None
        grad = self.params.zeros_like()
        g = self.params.view(grad, "logits")
        g[row] = -np.exp(lp)
        g[row, y.label] += 1.0
        return value, grad
