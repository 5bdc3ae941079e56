from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..seqcore import Alphabet, AlphabetMismatch, Item


@dataclass(frozen=True)
class Block:
    name: str
    start: int
    shape: tuple[int, ...]
    kind: str  # "weight" is drawn at init, "bias" starts at zero

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def stop(self) -> int:
        return self.start + self.size


class ParamVector:
    """Flat float64 parameter array with named, reshaped views onto it."""

    def __init__(self, blocks: list[tuple[str, tuple[int, ...], str]], values=None):
        layout, offset = {}, 0
        for name, shape, kind in blocks:
            b = Block(name, offset, tuple(shape), kind)
            layout[name] = b
            offset = b.stop
        self.layout: dict[str, Block] = layout
        if values is None:
            self.values = np.zeros(offset)
        else:
            values = np.array(values, dtype=float)
            if values.shape != (offset,):
                raise ValueError(f"expected {offset} parameters, got shape {values.shape}")
            self.values = values

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, name: str) -> np.ndarray:
        b = self.layout[name]
        return self.values[b.start:b.stop].reshape(b.shape)

    def blocks(self) -> Iterator[Block]:
        return iter(self.layout.values())

    def spec(self) -> list[tuple[str, tuple[int, ...], str]]:
        return [(b.name, b.shape, b.kind) for b in self.layout.values()]

    def copy(self) -> "ParamVector":
        return ParamVector(self.spec(), self.values.copy())

    def zeros_like(self) -> np.ndarray:
        return np.zeros_like(self.values)

    def view(self, flat: np.ndarray, name: str) -> np.ndarray:
        """The ``name`` block of any array laid out like this one (e.g. a gradient)."""
        b = self.layout[name]
        return flat[b.start:b.stop].reshape(b.shape)


class ConditionalModel:
    """Parameterized ``P(output | input; theta)`` with exact likelihoods.

    Subclasses implement ``log_prob_and_grad``, ``decode`` and the ``family``
    tag; everything else derives from those.
    """

    family = "abstract"
    emits_eos = False

    def __init__(self, input_alphabet: Alphabet, output_alphabet: Alphabet, params: ParamVector):
        self.input_alphabet = input_alphabet
        self.output_alphabet = output_alphabet
        self.params = params

    # -- core -------------------------------------------------------------
    def log_prob_and_grad(self, x: Item, y: Item, need_grad: bool = True) -> tuple[float, np.ndarray | None]:
        raise NotImplementedError

    def decode(self, x: Item, beam_width: int = 1) -> Item:
        raise NotImplementedError

    def hyperparams(self) -> dict:
        return {}

    # -- derived ----------------------------------------------------------
    def log_prob(self, x: Item, y: Item) -> float:
        return self.log_prob_and_grad(x, y, need_grad=False)[0]

    def grad_log_prob(self, x: Item, y: Item) -> np.ndarray:
        return self.log_prob_and_grad(x, y)[1]

    def n_output_symbols(self, y: Item) -> int:
        """Number of predicted symbols in ``y`` (counts EOS for sequence models)."""
        return len(y) + (1 if self.emits_eos else 0)

    def check(self, x: Item, y: Item | None = None) -> None:
        if x.alphabet.size != self.input_alphabet.size:
            raise AlphabetMismatch(
                f"alphabet mismatch: input alphabet {x.alphabet.size}, model expects {self.input_alphabet.size}"
            )
        if y is not None and y.alphabet.size != self.output_alphabet.size:
            raise AlphabetMismatch(
                f"alphabet mismatch: output alphabet {y.alphabet.size}, model expects {self.output_alphabet.size}"
            )

    def set_values(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != self.params.values.shape:
            raise ValueError("parameter shape mismatch")
        self.params.values[...] = values

    def clone(self) -> "ConditionalModel":
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.params = self.params.copy()
        return new

    def __repr__(self):
        return (f"{type(self).__name__}(in={self.input_alphabet.size}, "
                f"out={self.output_alphabet.size}, n_params={len(self.params)})")


class EnumerableModel(ConditionalModel):
    """Model whose outputs are the length-1 items over its output alphabet."""

    def output_log_probs(self, x: Item) -> np.ndarray:
        raise NotImplementedError

    def outputs(self) -> list[Item]:
        return [Item((k,), self.output_alphabet) for k in range(self.output_alphabet.size)]

    def decode(self, x: Item, beam_width: int = 1) -> Item:
        if beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        # np.argmax returns the first maximum, i.e. the lowest index on ties
        return Item((int(np.argmax(self.output_log_probs(x))),), self.output_alphabet)


def log_prob(model: ConditionalModel, x: Item, y: Item) -> float:
    return model.log_prob(x, y)


def grad_log_prob(model: ConditionalModel, x: Item, y: Item) -> np.ndarray:
    return model.grad_log_prob(x, y)


def decode(model: ConditionalModel, x: Item, beam_width: int = 1) -> Item:
    return model.decode(x, beam_width)


def init_params(model: ConditionalModel, scale: float, rng: np.random.Generator,
                randomize_all: bool = False) -> ParamVector:
    """Fresh parameters for ``model``'s layout.

    Weight blocks are uniform in ``[-scale, scale]``; bias blocks (which
    include tabular logits) are zero unless ``randomize_all`` is set.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    pv = ParamVector(model.params.spec())
    for b in pv.blocks():
        if b.kind == "weight" or randomize_all:
            pv.values[b.start:b.stop] = rng.uniform(-scale, scale, size=b.size)
    return pv


def exhaustive_argmax(model: EnumerableModel, x: Item) -> Item:
    """Reference decoder: score every output with ``log_prob`` and keep the first best."""
    best, best_lp = None, -math.inf
    for y in model.outputs():
        lp = model.log_prob(x, y)
        if lp > best_lp:
            best, best_lp = y, lp
    return best
