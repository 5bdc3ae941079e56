"""Synthetic dual tasks with known ground truth, and exact oracles over them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .duality import duality_term
from .marginals import CategoricalMarginal, MarginalModel, UniformLabelMarginal
from .models.base import EnumerableModel
from .seqcore import Alphabet, Item, SamplePair, log_softmax


@dataclass(frozen=True)
class TabularJoint:
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2 or np.any(t < 0) or abs(t.sum() - 1.0) > 1e-9:
            raise ValueError("joint must be a non-negative matrix summing to 1")
        object.__setattr__(self, "table", t)

    @property
    def x_alphabet(self) -> Alphabet:
        return Alphabet(self.table.shape[0])

    @property
    def y_alphabet(self) -> Alphabet:
        return Alphabet(self.table.shape[1])

    @property
    def px(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def marginal(self, side: str) -> CategoricalMarginal:
        return CategoricalMarginal(self.px if side == "x" else self.py)

    def manifest(self) -> dict:
        return {"family": "tabular", "shape": list(self.table.shape)}


@dataclass(frozen=True)
class CipherTask:
    """Noisy substitution cipher: ``y_t = perm[x_t]`` w.p. ``1 - noise``."""

    vocab: int
    perm: tuple[int, ...]
    noise: float = 0.1
    min_len: int = 5
    max_len: int = 10

    def __post_init__(self):
        if sorted(self.perm) != list(range(self.vocab)):
            raise ValueError("perm must be a permutation of range(vocab)")
        if not 0 <= self.noise < 0.5:
            raise ValueError("noise must lie in [0, 0.5)")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("invalid length range")

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.vocab)

    @property
    def x_alphabet(self) -> Alphabet:
        return self.alphabet

    @property
    def y_alphabet(self) -> Alphabet:
        return self.alphabet

    @property
    def inverse(self) -> tuple[int, ...]:
        inv = [0] * self.vocab
        for a, b in enumerate(self.perm):
            inv[b] = a
        return tuple(inv)

    def channel(self) -> np.ndarray:
        """``channel[a, b] = P(y_t = b | x_t = a)``."""
        off = self.noise / (self.vocab - 1)
        ch = np.full((self.vocab, self.vocab), off)
        ch[np.arange(self.vocab), list(self.perm)] = 1.0 - self.noise
        return ch

    def bayes_accuracy(self) -> float:
        """Best per-position accuracy for either direction."""
        return 1.0 - self.noise

    def manifest(self) -> dict:
        return {"family": "cipher", "vocab": self.vocab, "perm": list(self.perm), "noise": self.noise,
                "min_len": self.min_len, "max_len": self.max_len}


@dataclass(frozen=True)
class ClassifyGenerateTask:
    """Uniform class label; sentence tokens i.i.d. from a class-specific categorical."""

    class_token_probs: np.ndarray  # (K, V)
    min_len: int = 3
    max_len: int = 8

    def __post_init__(self):
        p = np.asarray(self.class_token_probs, dtype=float)
        if p.ndim != 2 or np.any(p <= 0) or not np.allclose(p.sum(axis=1), 1.0):
            raise ValueError("class_token_probs must have strictly positive rows summing to 1")
        object.__setattr__(self, "class_token_probs", p)

    @property
    def n_classes(self) -> int:
        return self.class_token_probs.shape[0]

    @property
    def vocab(self) -> int:
        return self.class_token_probs.shape[1]

    @property
    def x_alphabet(self) -> Alphabet:
        return Alphabet(self.vocab)

    @property
    def y_alphabet(self) -> Alphabet:
        return Alphabet(self.n_classes)

    def label_marginal(self) -> UniformLabelMarginal:
        return UniformLabelMarginal(self.n_classes)

    def class_log_posterior(self, tokens) -> np.ndarray:
        """``log P(y | x)``; the uniform prior and the length law cancel."""
        scores = np.log(self.class_token_probs[:, list(tokens)]).sum(axis=1)
        return log_softmax(scores)

    def manifest(self) -> dict:
        return {"family": "classify", "class_token_probs": self.class_token_probs.tolist(),
                "min_len": self.min_len, "max_len": self.max_len}


# -- generators ---------------------------------------------------------------

def gen_tabular_joint(vx: int, vy: int, concentration: float, rng: np.random.Generator) -> TabularJoint:
    if vx < 2 or vy < 2:
        raise ValueError("both sides need at least two values")
    if not concentration > 0:
        raise ValueError("concentration must be positive")
    flat = rng.dirichlet(np.full(vx * vy, float(concentration)))
    # a Dirichlet draw can underflow to exact zeros at small concentration
    flat = np.maximum(flat, 1e-300)
    return TabularJoint((flat / flat.sum()).reshape(vx, vy))


def gen_cipher_task(vocab: int, noise: float, min_len: int, max_len: int,
                    rng: np.random.Generator) -> CipherTask:
    perm = tuple(int(v) for v in rng.permutation(vocab))
    return CipherTask(vocab, perm, noise, min_len, max_len)


def gen_classify_task(n_classes: int, vocab: int, concentration: float, min_len: int, max_len: int,
                      rng: np.random.Generator) -> ClassifyGenerateTask:
    probs = rng.dirichlet(np.full(vocab, float(concentration)), size=n_classes)
    probs = np.maximum(probs, 1e-12)
    return ClassifyGenerateTask(probs / probs.sum(axis=1, keepdims=True), min_len, max_len)


def sample_dataset(task, n: int, rng: np.random.Generator) -> list[SamplePair]:
    if n < 1:
        raise ValueError("n must be >= 1")
    ax, ay = task.x_alphabet, task.y_alphabet
    if isinstance(task, TabularJoint):
        cells = rng.choice(task.table.size, size=n, p=task.table.ravel())
        vy = task.table.shape[1]
        return [SamplePair(Item((int(c) // vy,), ax), Item((int(c) % vy,), ay)) for c in cells]
    if isinstance(task, CipherTask):
        ch = np.cumsum(task.channel(), axis=1)
        pairs = []
        for _ in range(n):
            length = int(rng.integers(task.min_len, task.max_len + 1))
            xs = rng.integers(0, task.vocab, size=length)
            u = rng.random(length)
            ys = [min(int(np.searchsorted(ch[a], ui, side="right")), task.vocab - 1) for a, ui in zip(xs, u)]
            pairs.append(SamplePair(Item(tuple(int(a) for a in xs), ax), Item(tuple(ys), ay)))
        return pairs
    if isinstance(task, ClassifyGenerateTask):
        pairs = []
        for _ in range(n):
            label = int(rng.integers(task.n_classes))
            length = int(rng.integers(task.min_len, task.max_len + 1))
            toks = rng.choice(task.vocab, size=length, p=task.class_token_probs[label])
            pairs.append(SamplePair(Item(tuple(int(t) for t in toks), ax), Item((label,), ay)))
        return pairs
    raise TypeError(f"unsupported task {type(task).__name__}")


# -- oracles ------------------------------------------------------------------

def true_conditional(joint: TabularJoint, direction: str = "xy") -> np.ndarray:
    """``P(y|x)`` as an (x, y) table for ``"xy"``; ``P(x|y)`` as a (y, x) table for ``"yx"``."""
    if direction not in ("xy", "yx"):
        raise ValueError(f"direction must be 'xy' or 'yx', got {direction!r}")
    t = joint.table if direction == "xy" else joint.table.T
    marg = t.sum(axis=1, keepdims=True)
    if np.any(marg <= 0):
        raise ValueError("unsupported input: zero marginal probability")
    return t / marg


def model_conditional(model: EnumerableModel) -> np.ndarray:
    """Enumerate ``P(out|in)`` of an enumerable model as a table."""
    rows = []
    for i in range(model.input_alphabet.size):
        rows.append(np.exp(model.output_log_probs(Item((i,), model.input_alphabet))))
    return np.array(rows)


def kl_to_truth(model: EnumerableModel, joint: TabularJoint, direction: str = "xy") -> float:
    """``E_in KL(P*(.|in) || P_model(.|in))``; ``inf`` when the model misses support."""
    truth = true_conditional(joint, direction)
    weights = joint.px if direction == "xy" else joint.py
    total = 0.0
    for i in range(truth.shape[0]):
        lq = model.output_log_probs(Item((i,), model.input_alphabet))
        for j in range(truth.shape[1]):
            p = truth[i, j]
            if p <= 0:
                continue
            if lq[j] == -math.inf:
                return math.inf
            total += weights[i] * p * (math.log(p) - lq[j])
    return max(total, 0.0)


def exact_expected_duality(joint: TabularJoint, primal: EnumerableModel, dual: EnumerableModel,
                           marg_x: MarginalModel, marg_y: MarginalModel) -> float:
    ax, ay = joint.x_alphabet, joint.y_alphabet
    total = 0.0
    for i, j in itertools.product(range(ax.size), range(ay.size)):
        w = joint.table[i, j]
        if w == 0:
            continue
        x, y = Item((i,), ax), Item((j,), ay)
        term = duality_term(marg_x.log_prob(x), primal.log_prob(x, y), marg_y.log_prob(y), dual.log_prob(y, x))
        total += w * term.loss
    return total


def cipher_posterior(task: CipherTask, y: Item) -> np.ndarray:
    """Per-position ``P(x_t | y_t)`` as a ``(len(y), V)`` array."""
    ch = task.channel()
    post = ch[:, list(y.tokens)].T  # uniform prior over x cancels
    return post / post.sum(axis=1, keepdims=True)


def classify_bayes_error(task: ClassifyGenerateTask, sentences) -> float:
    """Mean of ``1 - max_y P(y|x)`` over the given sentences."""
    errs = [1.0 - math.exp(task.class_log_posterior(s.tokens if isinstance(s, Item) else s).max())
            for s in sentences]
    return float(np.mean(errs))


def classify_bayes_error_exact(task: ClassifyGenerateTask, max_sequences: int = 200_000) -> float:
    """Bayes error by enumerating every sentence up to ``max_len``."""
    lengths = range(task.min_len, task.max_len + 1)
    if sum(task.vocab ** L for L in lengths) > max_sequences:
        raise ValueError("sentence space too large to enumerate")
    p = task.class_token_probs
    K = task.n_classes
    err = 0.0
    for L in lengths:
        for toks in itertools.product(range(task.vocab), repeat=L):
            joint = np.prod(p[:, list(toks)], axis=1) / K
            err += (joint.sum() - joint.max()) / len(lengths)
    return float(err)
