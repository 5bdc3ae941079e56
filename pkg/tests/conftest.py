from dataclasses import dataclass

import pytest

from dualsl.duality import LambdaRule
from dualsl.marginals import fit_categorical
from dualsl.models import TabularSoftmaxModel
from dualsl.seqcore import Alphabet, Dataset, Item, Splits, derive_rng
from dualsl.tasks import gen_tabular_joint, sample_dataset
from dualsl.trainer import OptimSpec, TrainConfig

# Low-data tabular protocol ("T1") shared by the trainer and acceptance tests.
T1_V = 8
T1_CONCENTRATION = 0.5
T1_N_VALID = 50
T1_N_TEST = 1000
T1_MARGINAL_K = 1.0
T1_LAMBDA = 0.01
T1_SEEDS = tuple(range(10))


@dataclass
class TabularSetup:
    joint: object
    data: Splits
    marg_x: object
    marg_y: object
    primal: TabularSoftmaxModel
    dual: TabularSoftmaxModel


def tabular_setup(seed, n_train=50, n_valid=T1_N_VALID, n_test=T1_N_TEST, v=T1_V):
    joint = gen_tabular_joint(v, v, T1_CONCENTRATION, derive_rng(seed, 0))
    splits = []
    for i, (tag, n) in enumerate((("train", n_train), ("valid", n_valid), ("test", n_test))):
        splits.append(Dataset(sample_dataset(joint, n, derive_rng(seed, i + 1)) if n else (), tag))
    data = Splits(*splits)
    mx = fit_categorical(data.train.xs, joint.x_alphabet, T1_MARGINAL_K)
    my = fit_categorical(data.train.ys, joint.y_alphabet, T1_MARGINAL_K)
    return TabularSetup(joint, data, mx, my,
                        TabularSoftmaxModel(joint.x_alphabet, joint.y_alphabet),
                        TabularSoftmaxModel(joint.y_alphabet, joint.x_alphabet))


def t1_config(seed, lam=T1_LAMBDA, **kw):
    opt = OptimSpec("sgd", 0.2, 1.0)
    base = dict(batch_size=16, lambda_rule=LambdaRule("constant", lam, lam), opt_xy=opt, opt_yx=opt,
                max_epochs=200, stop_patience=10, seed=seed, eval_decode=False)
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture
def a4():
    return Alphabet(4)


@pytest.fixture
def a3():
    return Alphabet(3)


def items(alphabet, *seqs):
    return [Item(tuple(s), alphabet) for s in seqs]


def pytest_terminal_summary(terminalreporter):
    import sys
    lines = next((m.RESULTS for name, m in list(sys.modules.items())
                  if name.endswith("test_acceptance") and hasattr(m, "RESULTS")), None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
