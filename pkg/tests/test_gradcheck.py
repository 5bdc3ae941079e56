import numpy as np
import pytest

from dualsl.models import TabularSoftmaxModel, check_model, finite_diff_grad, init_params
from dualsl.models.gradcheck import central_difference, relative_error
from dualsl.seqcore import Alphabet, Item, make_rng


class TestCentralDifference:
    def test_quadratic(self):
        g = central_difference(lambda t: float(t[0] ** 2), [3.0], 1e-5)
        assert g[0] == pytest.approx(6.0, abs=1e-8)

    def test_zero_step(self):
        with pytest.raises(ValueError):
            central_difference(lambda t: float(t[0]), [1.0], 0.0)

    def test_overflow(self):
        with pytest.raises(FloatingPointError, match="numeric overflow"):
            central_difference(lambda t: float("inf"), [1.0])

    def test_input_untouched(self):
        theta = np.array([1.0, 2.0])
        central_difference(lambda t: float(t @ t), theta)
        assert theta.tolist() == [1.0, 2.0]


class TestModelCheck:
    def test_tabular(self):
        a = Alphabet(4)
        m = TabularSoftmaxModel(a, a)
        m.logits[...] = make_rng(0).normal(size=(4, 4))
        x, y = Item((2,), a), Item((1,), a)
        assert relative_error(m.grad_log_prob(x, y), finite_diff_grad(m, x, y)) <= 1e-6
        # the probe is a clone, the model itself is not perturbed
        assert check_model(m, x, y) <= 1e-6

    def test_relative_error_definition(self):
        assert relative_error(np.array([1.0, 2.0]), np.array([1.0, 1.0])) == pytest.approx(0.5)


def _random_item(rng, alphabet, hi):
    n = int(rng.integers(1, hi + 1))
    return Item(tuple(int(t) for t in rng.integers(0, alphabet.size, size=n)), alphabet)


@pytest.mark.parametrize("family", ["tabular", "linear", "recurrent", "recurrent_plain"])
def test_fifty_random_triples(family):
    from dualsl.models import LinearSoftmaxModel, RecurrentTransducerModel
    rng = make_rng(50)
    ain, aout = Alphabet(5), Alphabet(4)
    model, hi_x, hi_y = {
        "tabular": (TabularSoftmaxModel(ain, aout), 1, 1),
        "linear": (LinearSoftmaxModel(ain, aout), 6, 1),
        "recurrent": (RecurrentTransducerModel(ain, aout, hidden=4), 4, 4),
        "recurrent_plain": (RecurrentTransducerModel(ain, aout, hidden=4, aligned=False), 4, 4),
    }[family]
    worst = 0.0
    for _ in range(50):
        model.params = init_params(model, 1.0, rng, randomize_all=True)
        x, y = _random_item(rng, ain, hi_x), _random_item(rng, aout, hi_y)
        worst = max(worst, check_model(model, x, y))
    assert worst <= 1e-4
