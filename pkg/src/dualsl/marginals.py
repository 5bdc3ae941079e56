"""Frozen marginal estimators ``log P(x)`` used inside the duality term.

None of these objects is ever touched by the trainer; ``state_hash`` lets
callers prove that.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from pathlib import Path
from typing import Sequence

import numpy as np

from .seqcore import Alphabet, AlphabetMismatch, Item


class MarginalModel:
    alphabet: Alphabet

    def log_prob(self, item: Item) -> float:
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def state_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def _check(self, item: Item) -> None:
        if item.alphabet.size != self.alphabet.size:
            raise AlphabetMismatch(
                f"alphabet mismatch: item alphabet {item.alphabet.size}, marginal expects {self.alphabet.size}"
            )


def marginal_log_prob(model: MarginalModel, item: Item) -> float:
    return model.log_prob(item)


class UniformLabelMarginal(MarginalModel):
    """``log P(y) = -log K`` for every length-1 label."""

    def __init__(self, n_classes: int):
        self.alphabet = Alphabet(n_classes)

    def log_prob(self, item):
        self._check(item)
        if len(item) != 1:
            raise ValueError("uniform label marginal only scores length-1 items")
        return -math.log(self.alphabet.size)

    def to_text(self):
        return f"uniform {self.alphabet.size}\n"


class CategoricalMarginal(MarginalModel):
    """Explicit distribution over the length-1 items of an alphabet."""

    def __init__(self, probs: Sequence[float]):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1 or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be a non-negative vector summing to 1")
        self.alphabet = Alphabet(probs.size)
        with np.errstate(divide="ignore"):
            self.log_probs = np.log(probs)

    def log_prob(self, item):
        self._check(item)
        return float(self.log_probs[item.label])

    @classmethod
    def from_log_probs(cls, log_probs: Sequence[float]) -> "CategoricalMarginal":
        out = cls(np.exp(np.asarray(log_probs, dtype=float)))
        out.log_probs = np.asarray(log_probs, dtype=float)
        return out

    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def to_text(self):
        return "categorical " + " ".join(repr(float(v)) for v in self.log_probs) + "\n"


class EmpiricalCategorical(CategoricalMarginal):
    """Add-k smoothed label frequencies: ``(count + k) / (total + k V)``."""

    def __init__(self, counts: Sequence[float], k: float):
        counts = np.asarray(counts, dtype=float)
        if k < 0:
            raise ValueError("smoothing constant must be non-negative")
        total = counts.sum() + k * counts.size
        if total <= 0:
            raise ValueError("no data")
        self.counts = counts
        self.k = float(k)
        super().__init__((counts + k) / total)

    def to_text(self):
        return f"empirical k={self.k!r} " + " ".join(repr(float(c)) for c in self.counts) + "\n"


def fit_categorical(corpus: Sequence[Item], alphabet: Alphabet, k: float = 1.0) -> EmpiricalCategorical:
    if not corpus:
        raise ValueError("no data")
    counts = np.zeros(alphabet.size)
    for it in corpus:
        if it.alphabet.size != alphabet.size:
            raise AlphabetMismatch("alphabet mismatch in corpus")
        counts[it.label] += 1
    return EmpiricalCategorical(counts, k)


class NGramLM(MarginalModel):
    """Add-k smoothed n-gram model with BOS padding and a predicted EOS.

    The next-symbol distribution of every context covers the ``V`` tokens
    plus EOS, so item probabilities normalize over all lengths.
    """

    def __init__(self, alphabet: Alphabet, order: int, k: float, counts: dict | None = None):
        if order < 1:
            raise ValueError("order must be >= 1")
        if not k > 0:
            raise ValueError("smoothing constant k must be positive")
        self.alphabet = alphabet
        self.order = int(order)
        self.k = float(k)
        # context tuple -> Counter(next symbol -> count)
        self.counts: dict[tuple[int, ...], Counter] = counts if counts is not None else {}
        self._totals = {ctx: sum(c.values()) for ctx, c in self.counts.items()}

    @property
    def n_symbols(self) -> int:
        return self.alphabet.size + 1

    def _symbols(self, item: Item) -> tuple[tuple[int, ...], tuple[int, ...]]:
        pad = (self.alphabet.bos,) * (self.order - 1)
        return pad + item.tokens, item.tokens + (self.alphabet.eos,)

    def events(self, item: Item):
        """``(context, next_symbol)`` pairs for ``item`` including the final EOS."""
        history, nexts = self._symbols(item)
        width = self.order - 1
        for i, sym in enumerate(nexts):
            yield history[i:i + width], sym

    def next_log_prob(self, context: tuple[int, ...], symbol: int) -> float:
        ctx_counts = self.counts.get(context)
        c = ctx_counts[symbol] if ctx_counts else 0
        total = self._totals.get(context, 0)
        return math.log((c + self.k) / (total + self.k * self.n_symbols))

    def next_distribution(self, context: tuple[int, ...]) -> np.ndarray:
        """Probabilities over ``[0..V) + [EOS]`` (EOS last)."""
        syms = list(range(self.alphabet.size)) + [self.alphabet.eos]
        return np.exp([self.next_log_prob(context, s) for s in syms])

    def log_prob(self, item):
        self._check(item)
        return float(sum(self.next_log_prob(ctx, s) for ctx, s in self.events(item)))

    def to_text(self):
        lines = [f"ngram order={self.order} k={self.k!r} alphabet={self.alphabet.size}"]
        for ctx in sorted(self.counts):
            for sym in sorted(self.counts[ctx]):
                lines.append(f"{' '.join(map(str, ctx)) or '-'}\t{sym}\t{self.counts[ctx][sym]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NGramLM":
        lines = text.splitlines()
        header = dict(f.split("=") for f in lines[0].split()[1:])
        counts: dict[tuple[int, ...], Counter] = {}
        for line in lines[1:]:
            if not line.strip():
                continue
            ctx_s, sym, cnt = line.split("\t")
            ctx = () if ctx_s == "-" else tuple(int(t) for t in ctx_s.split())
            counts.setdefault(ctx, Counter())[int(sym)] = int(cnt)
        return cls(Alphabet(int(header["alphabet"])), int(header["order"]), float(header["k"]), counts)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())


def fit_ngram(corpus: Sequence[Item], order: int = 3, k: float = 0.1,
              alphabet: Alphabet | None = None) -> NGramLM:
    if not corpus:
        raise ValueError("no data")
    alphabet = alphabet or corpus[0].alphabet
    lm = NGramLM(alphabet, order, k)
    counts: dict[tuple[int, ...], Counter] = {}
    for it in corpus:
        lm._check(it)
        for ctx, sym in lm.events(it):
            counts.setdefault(ctx, Counter())[sym] += 1
    return NGramLM(alphabet, order, k, counts)


def marginal_from_text(text: str) -> MarginalModel:
    head = text.split(None, 1)[0]
    if head == "ngram":
        return NGramLM.from_text(text)
    if head == "uniform":
        return UniformLabelMarginal(int(text.split()[1]))
    if head == "categorical":
        return CategoricalMarginal.from_log_probs([float(v) for v in text.split()[1:]])
    if head == "empirical":
        fields = text.split()
        return EmpiricalCategorical([float(v) for v in fields[2:]], float(fields[1].split("=")[1]))
    raise ValueError(f"unknown marginal kind {head!r}")
