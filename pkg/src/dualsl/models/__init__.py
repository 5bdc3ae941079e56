from .base import (
    ConditionalModel,
    EnumerableModel,
    ParamVector,
    decode,
    exhaustive_argmax,
    grad_log_prob,
    init_params,
    log_prob,
)
from .gradcheck import central_difference, check_model, finite_diff_grad, relative_error
from .linear import LinearSoftmaxModel
from .recurrent import RecurrentTransducerModel
from .serialize import load_model, model_from_text, model_to_text, save_model
from .tabular import TabularSoftmaxModel

__all__ = [
    "ConditionalModel",
    "EnumerableModel",
    "LinearSoftmaxModel",
    "ParamVector",
    "RecurrentTransducerModel",
    "TabularSoftmaxModel",
    "central_difference",
    "check_model",
    "decode",
    "exhaustive_argmax",
    "finite_diff_grad",
    "grad_log_prob",
    "init_params",
    "load_model",
    "log_prob",
    "model_from_text",
    "model_to_text",
    "relative_error",
    "save_model",
]
