"""Joint primal/dual training with the duality penalty, plus evaluation.

``dsl_train`` runs both models over shared minibatches. Each model's
minibatch gradient is the mean over examples of its negative log-likelihood
gradient plus ``lambda * d(delta**2)/d(theta)``, where the other model's
log-probability is held constant. With both lambdas at zero the loop is
numerically identical to two ``supervised_train`` runs with the same seed.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .duality import LambdaRule, duality_grads, duality_term, lambda_for
from .marginals import MarginalModel
from .models.base import ConditionalModel
from .optim import PlateauSchedule, clip_by_norm, make_optimizer, plateau_update
from .seqcore import Dataset, Splits, derive_rng

log = logging.getLogger(__name__)

LN2 = math.log(2.0)


class NumericFailure(RuntimeError):
    pass


@dataclass
class OptimSpec:
    kind: str = "sgd"
    lr: float = 0.2
    clip: float | None = 1.0
    plateau_patience: int = 5
    lr_floor: float = 0.0


@dataclass
class TrainConfig:
    batch_size: int = 16
    lambda_rule: LambdaRule = field(default_factory=LambdaRule)
    opt_xy: OptimSpec = field(default_factory=OptimSpec)
    opt_yx: OptimSpec = field(default_factory=OptimSpec)
    max_epochs: int = 50
    eval_every: int = 1
    stop_patience: int = 10
    seed: int = 0
    eval_decode: bool = True
    beam_width: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")


@dataclass
class RunRecord:
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def append(self, row: dict) -> None:
        self.rows.append({c: row.get(c, math.nan) for c in self.columns})

    def series(self, name: str) -> list[float]:
        return [r[name] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# -- evaluation -------------------------------------------------------------

def _pairs(data: Dataset, direction: str):
    for p in data:
        yield (p.x, p.y) if direction == "xy" else (p.y, p.x)


def direction_metrics(model: ConditionalModel, data: Dataset, direction: str,
                      decode: bool = True, beam_width: int = 1) -> dict:
    """NLL, perplexity, bits per dimension and decode accuracy for one direction."""
    nlls, n_sym, bpds = [], 0, []
    correct = n_tok = exact = 0
    for inp, out in _pairs(data, direction):
        nll = -model.log_prob(inp, out)
        nlls.append(nll)
        n_sym += model.n_output_symbols(out)
        bpds.append(nll / (len(out) * LN2))
        if decode:
            pred = model.decode(inp, beam_width)
            correct += sum(a == b for a, b in zip(pred.tokens, out.tokens))
            n_tok += len(out)
            exact += pred.tokens == out.tokens
    m = {
        f"nll_{direction}": float(np.mean(nlls)),
        f"ppl_{direction}": math.exp(float(np.sum(nlls)) / n_sym),
        f"bpd_{direction}": float(np.mean(bpds)),
    }
    if decode:
        m[f"acc_{direction}"] = correct / n_tok
        m[f"err_{direction}"] = 1.0 - exact / len(nlls)
    return m


def duality_losses(primal, dual, marg_x, marg_y, data: Dataset) -> np.ndarray:
    out = []
    for p in data:
        t = duality_term(marg_x.log_prob(p.x), primal.log_prob(p.x, p.y),
                         marg_y.log_prob(p.y), dual.log_prob(p.y, p.x))
        out.append(t.loss)
    return np.array(out)


def empirical_risk(primal, dual, data: Dataset) -> float:
    """Mean over pairs of ``(-log P(y|x) - log P(x|y)) / 2``."""
    total = 0.0
    for p in data:
        total += (-primal.log_prob(p.x, p.y) - dual.log_prob(p.y, p.x)) / 2.0
    return total / len(data)


def evaluate(primal: ConditionalModel, dual: ConditionalModel, marg_x: MarginalModel,
             marg_y: MarginalModel, data: Dataset, decode: bool = True, beam_width: int = 1) -> dict:
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    m = {"risk": empirical_risk(primal, dual, data)}
    m.update(direction_metrics(primal, data, "xy", decode, beam_width))
    m.update(direction_metrics(dual, data, "yx", decode, beam_width))
    m["duality"] = float(np.mean(duality_losses(primal, dual, marg_x, marg_y, data)))
    return m


# -- training ---------------------------------------------------------------

class _Arm:
    def __init__(self, model: ConditionalModel, spec: OptimSpec, direction: str):
        self.model = model
        self.direction = direction
        self.spec = spec
        self.opt = make_optimizer(spec.kind, spec.lr)
        self.sched = PlateauSchedule(spec.lr, patience=spec.plateau_patience, floor=spec.lr_floor)
        self.best_values = model.params.values.copy()

    def io(self, pair):
        return (pair.x, pair.y) if self.direction == "xy" else (pair.y, pair.x)


def _columns(directions, duality: bool, decode: bool) -> list[str]:
    cols = ["epoch", "step"]
    for d in directions:
        cols.append(f"train_nll_{d}")
    for d in directions:
        cols += [f"valid_nll_{d}", f"valid_ppl_{d}", f"valid_bpd_{d}"]
        if decode:
            cols += [f"valid_acc_{d}", f"valid_err_{d}"]
    cols.append("valid_nll")
    if duality:
        cols += ["valid_duality", "test_duality"]
    cols += [f"lr_{d}" for d in directions]
    return cols


def _train(config: TrainConfig, arms: list[_Arm], data: Splits, marg_x=None, marg_y=None,
           on_step: Callable | None = None) -> RunRecord:
    train = data.train
    if len(train) == 0 or len(data.valid) == 0:
        raise ValueError("training and validation splits must be non-empty")
    joint = len(arms) == 2
    directions = [a.direction for a in arms]
    has_test = len(data.test) > 0
    record = RunRecord(_columns(directions, joint, config.eval_decode))
    if joint:
        hashes = (marg_x.state_hash(), marg_y.state_hash())
        lpx = [marg_x.log_prob(p.x) for p in train]
        lpy = [marg_y.log_prob(p.y) for p in train]
        lambdas = [lambda_for(config.lambda_rule, p.x) for p in train]

    shuffle_rng = derive_rng(config.seed, 1)
    step = 0
    best, bad = math.inf, 0

    def evaluate_now(epoch):
        nonlocal best, bad
        row = {"epoch": epoch, "step": step}
        for a in arms:
            d = a.direction
            nlls = [-a.model.log_prob(*a.io(p)) for p in train]
            for i, v in enumerate(nlls):
                if not math.isfinite(v):
                    raise NumericFailure(f"non-finite loss at training example {i} ({d})")
            row[f"train_nll_{d}"] = float(np.mean(nlls))
            vm = direction_metrics(a.model, data.valid, d, config.eval_decode, config.beam_width)
            for k, v in vm.items():
                row["valid_" + k] = v
        valid_nll = float(np.mean([row[f"valid_nll_{d}"] for d in directions]))
        row["valid_nll"] = valid_nll
        if joint:
            row["valid_duality"] = float(np.mean(duality_losses(arms[0].model, arms[1].model, marg_x, marg_y, data.valid)))
            if has_test:
                row["test_duality"] = float(np.mean(duality_losses(arms[0].model, arms[1].model, marg_x, marg_y, data.test)))
        if not math.isfinite(valid_nll):
            raise NumericFailure(f"non-finite validation NLL at epoch {epoch}")
        for a in arms:
            row[f"lr_{a.direction}"] = a.opt.lr
        record.append(row)
        if valid_nll < best:
            best, bad = valid_nll, 0
            record.best_epoch = epoch
            for a in arms:
                a.best_values = a.model.params.values.copy()
        else:
            bad += 1
        if epoch > 0:
            for a in arms:
                a.opt.lr = plateau_update(a.sched, row[f"valid_nll_{a.direction}"])
        return bad >= config.stop_patience

    evaluate_now(0)
    m = config.batch_size
    for epoch in range(1, config.max_epochs + 1):
        perm = shuffle_rng.permutation(len(train))
        for start in range(0, len(perm), m):
            batch = perm[start:start + m]
            grads = [np.zeros_like(a.model.params.values) for a in arms]
            for i in batch:
                pair = train[i]
                lps, gs = [], []
                for a in arms:
                    lp, g = a.model.log_prob_and_grad(*a.io(pair))
                    if not math.isfinite(lp):
                        raise NumericFailure(f"non-finite loss at training example {int(i)} ({a.direction})")
                    lps.append(lp)
                    gs.append(g)
                if joint:
                    term = duality_term(lpx[i], lps[0], lpy[i], lps[1])
                    d_xy, d_yx = duality_grads(term, gs[0], gs[1])
                    lam_xy, lam_yx = lambdas[i]
                    grads[0] += -gs[0] + lam_xy * d_xy
                    grads[1] += -gs[1] + lam_yx * d_yx
                else:
                    grads[0] += -gs[0]
            for a, g in zip(arms, grads):
                g /= len(batch)
                if a.spec.clip is not None:
                    g = clip_by_norm(g, a.spec.clip)
                a.opt.step(a.model.params.values, g)
            step += 1
            if on_step is not None:
                on_step(step, [a.model.params.values for a in arms])
        if epoch % config.eval_every == 0 or epoch == config.max_epochs:
            if evaluate_now(epoch):
                record.stopped_early = True
                log.info("stopping at epoch %d (best epoch %d)", epoch, record.best_epoch)
                break

    for a in arms:
        a.model.params.values[...] = a.best_values
    if joint and (marg_x.state_hash(), marg_y.state_hash()) != hashes:
        raise RuntimeError("marginal models changed during training")
    return record


def dsl_train(config: TrainConfig, primal: ConditionalModel, dual: ConditionalModel,
              marg_x: MarginalModel, marg_y: MarginalModel, data: Splits,
              on_step: Callable | None = None):
    """Train ``primal`` (x -> y) and ``dual`` (y -> x) jointly.

    The inputs are not modified; trained copies at the best validation
    checkpoint (mean of the two validation NLLs) are returned with the
    run record.
    """
    arms = [_Arm(primal.clone(), config.opt_xy, "xy"), _Arm(dual.clone(), config.opt_yx, "yx")]
    record = _train(config, arms, data, marg_x, marg_y, on_step)
    return arms[0].model, arms[1].model, record


def supervised_train(config: TrainConfig, model: ConditionalModel, data: Splits, direction: str = "xy",
                     on_step: Callable | None = None):
    if direction not in ("xy", "yx"):
        raise ValueError(f"direction must be 'xy' or 'yx', got {direction!r}")
    spec = config.opt_xy if direction == "xy" else config.opt_yx
    arm = _Arm(model.clone(), spec, direction)
    record = _train(config, [arm], data, on_step=on_step)
    return arm.model, record
