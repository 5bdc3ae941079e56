"""Domain types, datasets, seeded randomness and log-space helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MAX_LENGTH = 32
SPLITS = ("train", "valid", "test")


class AlphabetMismatch(ValueError):
    """A token id falls outside the alphabet a model or estimator expects."""


@dataclass(frozen=True)
class Alphabet:
    """Integer token alphabet ``[0, size)`` with two virtual markers above it."""

    size: int

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"alphabet size must be >= 2, got {self.size}")

    @property
    def bos(self) -> int:
        return self.size

    @property
    def eos(self) -> int:
        return self.size + 1


@dataclass(frozen=True)
class Item:
    tokens: tuple[int, ...]
    alphabet: Alphabet

    def __post_init__(self):
        tokens = tuple(int(t) for t in self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if not tokens:
            raise ValueError("an item must contain at least one token")
        for t in tokens:
            if t < 0 or t >= self.alphabet.size:
                raise AlphabetMismatch(
                    f"alphabet mismatch: token {t} outside [0, {self.alphabet.size})"
                )

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    @property
    def label(self) -> int:
        """The single token of a length-1 item (a class label)."""
        if len(self.tokens) != 1:
            raise ValueError(f"expected a length-1 item, got length {len(self.tokens)}")
        return self.tokens[0]


def item(tokens: Iterable[int] | int, alphabet: Alphabet) -> Item:
    if isinstance(tokens, (int, np.integer)):
        tokens = (int(tokens),)
    return Item(tuple(tokens), alphabet)


@dataclass(frozen=True)
class SamplePair:
    x: Item
    y: Item


@dataclass(frozen=True)
class Dataset:
    pairs: tuple[SamplePair, ...]
    split: str = "train"

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if self.split not in SPLITS:
            raise ValueError(f"unknown split tag {self.split!r}")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    @property
    def xs(self) -> list[Item]:
        return [p.x for p in self.pairs]

    @property
    def ys(self) -> list[Item]:
        return [p.y for p in self.pairs]


@dataclass(frozen=True)
class Splits:
    train: Dataset
    valid: Dataset
    test: Dataset = field(default_factory=lambda: Dataset((), "test"))


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the stream depends only on ``seed``."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent child stream for ``seed`` keyed by an integer path."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(path))
    return np.random.Generator(np.random.PCG64(ss))


def log_sum_exp(values: Sequence[float] | np.ndarray) -> float:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty reduction")
    m = float(np.max(v))
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.sum(np.exp(v - m))))


def log_softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax along the last axis."""
    m = np.max(scores, axis=-1, keepdims=True)
    shifted = scores - m
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _largest_remainder(n: int, fractions: Sequence[float]) -> list[int]:
    quotas = [n * f for f in fractions]
    sizes = [math.floor(q + 1e-9) for q in quotas]
    remainders = [q - s for q, s in zip(quotas, sizes)]
    # sorted() is stable, so equal remainders go to the earlier split
    order = sorted(range(len(fractions)), key=lambda i: -remainders[i])
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split_dataset(pairs: Sequence[SamplePair], fractions=(0.8, 0.1, 0.1),
                  rng: np.random.Generator | None = None) -> tuple[Dataset, Dataset, Dataset]:
    """Shuffle ``pairs`` and cut them into train/valid/test datasets.

    Split sizes use largest-remainder rounding of ``len(pairs) * fraction``.
    """
    if len(fractions) != 3:
        raise ValueError("expected three fractions (train, valid, test)")
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be positive and sum to 1, got {fractions}")
    if len(pairs) < len(fractions):
        raise ValueError("dataset too small")
    rng = rng if rng is not None else make_rng(0)
    sizes = _largest_remainder(len(pairs), fractions)
    perm = rng.permutation(len(pairs))
    out, start = [], 0
    for tag, size in zip(SPLITS, sizes):
        idx = perm[start:start + size]
        out.append(Dataset(tuple(pairs[i] for i in idx), tag))
        start += size
    return tuple(out)


def filter_by_length(pairs: Iterable[SamplePair], max_length: int = DEFAULT_MAX_LENGTH) -> list[SamplePair]:
    return [p for p in pairs if len(p.x) <= max_length and len(p.y) <= max_length]


def format_pairs(pairs: Iterable[SamplePair]) -> str:
    lines = []
    for p in pairs:
        lines.append(" ".join(map(str, p.x.tokens)) + "\t" + " ".join(map(str, p.y.tokens)))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_pairs(text: str, x_alphabet: Alphabet, y_alphabet: Alphabet) -> list[SamplePair]:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            xs, ys = line.split("\t")
            x = Item(tuple(int(t) for t in xs.split()), x_alphabet)
            y = Item(tuple(int(t) for t in ys.split()), y_alphabet)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        pairs.append(SamplePair(x, y))
    return pairs


def write_dataset(path: str | Path, pairs: Iterable[SamplePair], header: str | None = None) -> None:
    text = format_pairs(pairs)
    if header:
        text = "".join(f"# {h}\n" for h in header.splitlines()) + text
    Path(path).write_text(text)


def read_dataset(path: str | Path, x_alphabet: Alphabet, y_alphabet: Alphabet,
                 split: str = "train") -> Dataset:
    return Dataset(tuple(parse_pairs(Path(path).read_text(), x_alphabet, y_alphabet)), split)
