"""JSON round-trip for conditional models.

Parameters are written with ``repr`` so the decimal text maps back to the
same float64 bit pattern.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..seqcore import Alphabet
from .base import ConditionalModel, ParamVector
from .linear import LinearSoftmaxModel
from .recurrent import RecurrentTransducerModel
from .tabular import TabularSoftmaxModel

FAMILIES = {
    "tabular": TabularSoftmaxModel,
    "linear": LinearSoftmaxModel,
    "recurrent": RecurrentTransducerModel,
}


def model_to_text(model: ConditionalModel) -> str:
    doc = {
        "family": model.family,
        "input_alphabet": model.input_alphabet.size,
        "output_alphabet": model.output_alphabet.size,
        "hyperparams": model.hyperparams(),
        "layout": [[b.name, list(b.shape), b.kind] for b in model.params.blocks()],
        "params": [repr(float(v)) for v in model.params.values],
    }
    return json.dumps(doc, indent=1) + "\n"


def model_from_text(text: str) -> ConditionalModel:
    doc = json.loads(text)
    family = doc["family"]
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}")
    ain, aout = Alphabet(doc["input_alphabet"]), Alphabet(doc["output_alphabet"])
    hp = dict(doc.get("hyperparams", {}))
    hp.pop("feature_dim", None)
    model = FAMILIES[family](ain, aout, **hp)
    layout = [(name, tuple(shape), kind) for name, shape, kind in doc["layout"]]
    if layout != model.params.spec():
        raise ValueError("parameter layout does not match model family")
    model.params = ParamVector(layout, [float(v) for v in doc["params"]])
    return model


def save_model(model: ConditionalModel, path: str | Path) -> None:
    Path(path).write_text(model_to_text(model))


def load_model(path: str | Path) -> ConditionalModel:
    return model_from_text(Path(path).read_text())
