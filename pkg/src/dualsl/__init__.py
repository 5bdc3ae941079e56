"""Joint training of a primal model P(y|x) and a dual model P(x|y) coupled by
the probabilistic-duality penalty, with exact synthetic oracles."""

__version__ = "0.1.0"
