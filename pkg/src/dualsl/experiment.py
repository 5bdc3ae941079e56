"""Config-driven experiments: build a task, fit marginals, train arms, write outputs.

Configs are INI files; every ``section.key`` path maps to one scalar. Lists
(``experiment.arms``, ``experiment.lambda_sweep``) are comma-separated.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

from .duality import LambdaRule
from .marginals import CategoricalMarginal, UniformLabelMarginal, fit_categorical, fit_ngram
from .models import (
    LinearSoftmaxModel,
    RecurrentTransducerModel,
    TabularSoftmaxModel,
    init_params,
    model_to_text,
)
from .seqcore import Dataset, Splits, derive_rng, filter_by_length, format_pairs
from .tasks import (
    CipherTask,
    TabularJoint,
    gen_cipher_task,
    gen_classify_task,
    gen_tabular_joint,
    kl_to_truth,
    sample_dataset,
)
from .trainer import OptimSpec, TrainConfig, dsl_train, evaluate

ARMS = ("baseline", "dsl")


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _strs(s: str) -> list[str]:
    return [v.strip() for v in s.split(",") if v.strip()]


def _opt_float(s: str) -> float | None:
    return None if s.strip().lower() in ("", "none") else float(s)


_MODEL_KEYS = {"family": (str, None), "hidden": (int, 16), "aligned": (_bool, True), "init_scale": (float, 0.1)}
_MARGINAL_KEYS = {"kind": (str, None), "k": (float, 1.0), "order": (int, 3)}

SCHEMA = {
    "experiment": {
        "seed": (int, 0),
        "output_dir": (str, "runs/experiment"),
        "arms": (_strs, ["baseline", "dsl"]),
        "lambda_sweep": (_floats, []),
        "warm_start": (_bool, False),
    },
    "task": {
        "family": (str, "tabular"),
        "vx": (int, 8), "vy": (int, 8), "concentration": (float, 0.5),
        "vocab": (int, 8), "noise": (float, 0.1), "n_classes": (int, 2),
        "min_len": (int, 5), "max_len": (int, 10),
        "n_train": (int, 50), "n_valid": (int, 50), "n_test": (int, 1000),
        "max_length": (int, 32),
    },
    "model.xy": _MODEL_KEYS,
    "model.yx": _MODEL_KEYS,
    "marginal.x": _MARGINAL_KEYS,
    "marginal.y": _MARGINAL_KEYS,
    "train": {
        "batch_size": (int, 16),
        "lambda_mode": (str, "constant"),
        "lambda_xy": (float, 0.01), "lambda_yx": (float, 0.01),
        "lambda_divisor": (lambda s: None if s.strip().lower() in ("", "none") else int(s), None),
        "optimizer_xy": (str, "sgd"), "optimizer_yx": (str, "sgd"),
        "lr_xy": (float, 0.2), "lr_yx": (float, 0.2),
        "clip_xy": (_opt_float, 1.0), "clip_yx": (_opt_float, 1.0),
        "plateau_patience": (int, 5), "lr_floor": (float, 0.0),
        "max_epochs": (int, 200), "eval_every": (int, 1), "stop_patience": (int, 10),
        "eval_decode": (_bool, True), "beam_width": (int, 1),
    },
}

TASK_FAMILIES = ("tabular", "cipher", "classify")
DEFAULT_MODELS = {"tabular": ("tabular", "tabular"), "cipher": ("recurrent", "recurrent"),
                  "classify": ("linear", "recurrent")}
DEFAULT_MARGINALS = {"tabular": ("empirical", "empirical"), "cipher": ("ngram", "ngram"),
                     "classify": ("ngram", "uniform")}


@dataclass
class ExperimentConfig:
    values: dict[str, dict]
    text: str

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def output_dir(self) -> Path:
        return Path(self["experiment"]["output_dir"])

    def train_config(self, lam_xy: float | None = None, lam_yx: float | None = None) -> TrainConfig:
        t = self["train"]
        rule = LambdaRule(t["lambda_mode"], t["lambda_xy"] if lam_xy is None else lam_xy,
                          t["lambda_yx"] if lam_yx is None else lam_yx, t["lambda_divisor"])
        return TrainConfig(
            batch_size=t["batch_size"],
            lambda_rule=rule,
            opt_xy=OptimSpec(t["optimizer_xy"], t["lr_xy"], t["clip_xy"], t["plateau_patience"], t["lr_floor"]),
            opt_yx=OptimSpec(t["optimizer_yx"], t["lr_yx"], t["clip_yx"], t["plateau_patience"], t["lr_floor"]),
            max_epochs=t["max_epochs"], eval_every=t["eval_every"], stop_patience=t["stop_patience"],
            seed=self["experiment"]["seed"], eval_decode=t["eval_decode"], beam_width=t["beam_width"],
        )


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section {section!r}")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
    values: dict[str, dict] = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (conv, default) in keys.items():
            if cp.has_option(section, key):
                raw = cp.get(section, key)
                try:
                    values[section][key] = conv(raw)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"invalid value for {section}.{key}: {raw!r} ({exc})") from exc
            else:
                values[section][key] = default
    _validate(values)
    return ExperimentConfig(values, text)


def _validate(v: dict) -> None:
    task = v["task"]["family"]
    if task not in TASK_FAMILIES:
        raise ConfigError(f"task.family must be one of {TASK_FAMILIES}, got {task!r}")
    for d, default in zip(("xy", "yx"), DEFAULT_MODELS[task]):
        sec = v[f"model.{d}"]
        sec["family"] = sec["family"] or default
        if sec["family"] not in ("tabular", "linear", "recurrent"):
            raise ConfigError(f"model.{d}.family: unknown model family {sec['family']!r}")
    for side, default in zip(("x", "y"), DEFAULT_MARGINALS[task]):
        sec = v[f"marginal.{side}"]
        sec["kind"] = sec["kind"] or default
        if sec["kind"] not in ("empirical", "ngram", "uniform", "exact"):
            raise ConfigError(f"marginal.{side}.kind: unknown marginal {sec['kind']!r}")
        if sec["kind"] == "exact" and task != "tabular":
            raise ConfigError(f"marginal.{side}.kind: 'exact' requires a tabular task")
        if sec["k"] <= 0 and sec["kind"] in ("empirical", "ngram"):
            raise ConfigError(f"marginal.{side}.k must be positive")
    arms = v["experiment"]["arms"]
    bad = [a for a in arms if a not in ARMS]
    if bad or not arms:
        raise ConfigError(f"experiment.arms must be a non-empty subset of {ARMS}, got {arms}")
    t = v["train"]
    for key in ("optimizer_xy", "optimizer_yx"):
        if t[key] not in ("sgd", "adam", "adadelta"):
            raise ConfigError(f"train.{key}: unknown optimizer {t[key]!r}")
    if t["lambda_mode"] not in ("constant", "length_scaled"):
        raise ConfigError(f"train.lambda_mode: unknown mode {t['lambda_mode']!r}")
    for key in ("batch_size", "max_epochs", "eval_every", "stop_patience", "beam_width"):
        if t[key] < 1:
            raise ConfigError(f"train.{key} must be >= 1")
    for key in ("n_train", "n_valid"):
        if v["task"][key] < 1:
            raise ConfigError(f"task.{key} must be >= 1")


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# -- building blocks -------------------------------------------------------

def build_task(cfg: ExperimentConfig):
    t, seed = cfg["task"], cfg["experiment"]["seed"]
    rng = derive_rng(seed, 0)
    if t["family"] == "tabular":
        return gen_tabular_joint(t["vx"], t["vy"], t["concentration"], rng)
    if t["family"] == "cipher":
        return gen_cipher_task(t["vocab"], t["noise"], t["min_len"], t["max_len"], rng)
    return gen_classify_task(t["n_classes"], t["vocab"], t["concentration"], t["min_len"], t["max_len"], rng)


def build_data(cfg: ExperimentConfig, task) -> Splits:
    t, seed = cfg["task"], cfg["experiment"]["seed"]
    out = []
    for i, (tag, n) in enumerate((("train", t["n_train"]), ("valid", t["n_valid"]), ("test", t["n_test"]))):
        pairs = sample_dataset(task, n, derive_rng(seed, i + 1)) if n > 0 else []
        out.append(Dataset(filter_by_length(pairs, t["max_length"]), tag))
    return Splits(*out)


def build_models(cfg: ExperimentConfig, task):
    seed = cfg["experiment"]["seed"]
    models = []
    for i, (d, ain, aout) in enumerate((("xy", task.x_alphabet, task.y_alphabet),
                                        ("yx", task.y_alphabet, task.x_alphabet))):
        sec = cfg[f"model.{d}"]
        fam = sec["family"]
        if fam == "tabular":
            m = TabularSoftmaxModel(ain, aout)
        elif fam == "linear":
            m = LinearSoftmaxModel(ain, aout)
        else:
            m = RecurrentTransducerModel(ain, aout, hidden=sec["hidden"], aligned=sec["aligned"])
        m.params = init_params(m, sec["init_scale"], derive_rng(seed, 5 + i))
        models.append(m)
    return models


def build_marginals(cfg: ExperimentConfig, task, train: Dataset):
    out = []
    for side, alphabet, corpus in (("x", task.x_alphabet, train.xs), ("y", task.y_alphabet, train.ys)):
        sec = cfg[f"marginal.{side}"]
        kind = sec["kind"]
        if kind == "empirical":
            out.append(fit_categorical(corpus, alphabet, sec["k"]))
        elif kind == "ngram":
            out.append(fit_ngram(corpus, sec["order"], sec["k"], alphabet))
        elif kind == "uniform":
            out.append(UniformLabelMarginal(alphabet.size))
        else:
            out.append(CategoricalMarginal(task.px if side == "x" else task.py))
    return out


# -- outputs ---------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=float) + "\n"


def final_metrics(cfg: ExperimentConfig, task, primal, dual, mx, my, data: Splits, record) -> dict:
    split = data.test if len(data.test) else data.valid
    m = evaluate(primal, dual, mx, my, split, decode=cfg["train"]["eval_decode"],
                 beam_width=cfg["train"]["beam_width"])
    if isinstance(task, TabularJoint):
        m["kl_xy"] = kl_to_truth(primal, task, "xy")
        m["kl_yx"] = kl_to_truth(dual, task, "yx")
        m["kl"] = (m["kl_xy"] + m["kl_yx"]) / 2
    m["valid_nll"] = min(record.series("valid_nll"))
    m["best_epoch"] = record.best_epoch
    m["epochs_run"] = record.rows[-1]["epoch"]
    return m


def table_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(r[c])) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def comparison_rows(named: list[tuple[str, dict]]) -> tuple[list[dict], list[str]]:
    """Rows of final metrics plus ``d_<metric>`` = row - first row."""
    ref_name, ref = named[0]
    metrics = sorted(ref)
    for name, m in named[1:]:
        missing = sorted(set(metrics) ^ set(m))
        if missing:
            raise ValueError(f"metric schema mismatch between {ref_name} and {name}: {missing}")
    rows = []
    for name, m in named:
        row = {"run": name}
        for k in metrics:
            row[k] = float(m[k])
        for k in metrics:
            row[f"d_{k}"] = float(m[k]) - float(ref[k])
        rows.append(row)
    return rows, ["run"] + metrics + [f"d_{k}" for k in metrics]


def run_experiment(cfg: ExperimentConfig, out_dir: Path | None = None, sweep: bool = False) -> dict:
    """Run every configured arm (and the lambda sweep) and write all outputs.

    Returns ``{arm: final metrics}``; sweep rows appear as ``dsl_lambda=<v>``.
    """
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    for stale in out.glob("FAILED"):
        stale.unlink()
    _atomic_write(out / "config.ini", cfg.text)
    task = build_task(cfg)
    data = build_data(cfg, task)
    manifest = dict(task.manifest(), seed=cfg["experiment"]["seed"])
    if isinstance(task, TabularJoint):
        manifest["table"] = task.table.tolist()
    _atomic_write(out / "task_manifest.json", _json(manifest))
    for split in (data.train, data.valid, data.test):
        _atomic_write(out / f"{split.split}.txt", format_pairs(split))
    primal0, dual0 = build_models(cfg, task)
    mx, my = build_marginals(cfg, task, data.train)

    results: dict[str, dict] = {}
    trained: dict[str, tuple] = {}

    def run_arm(name, lam, init):
        tc = cfg.train_config(*(lam if lam is not None else (None, None)))
        p, d, rec = dsl_train(tc, init[0], init[1], mx, my, data)
        _atomic_write(out / f"{name}.csv", rec.to_csv())
        _atomic_write(out / f"{name}_primal.json", model_to_text(p))
        _atomic_write(out / f"{name}_dual.json", model_to_text(d))
        results[name] = final_metrics(cfg, task, p, d, mx, my, data, rec)
        trained[name] = (p, d)

    arms = cfg["experiment"]["arms"]
    sweep_values = list(cfg["experiment"]["lambda_sweep"])
    if sweep:
        if "baseline" not in arms:
            arms = ["baseline"] + list(arms)
        if not sweep_values:
            sweep_values = [0.0, 1e-3, 1e-2, 1e-1]
    if "baseline" in arms:
        run_arm("baseline", (0.0, 0.0), (primal0, dual0))
    if "dsl" in arms:
        init = trained["baseline"] if cfg["experiment"]["warm_start"] and "baseline" in trained else (primal0, dual0)
        run_arm("dsl", None, init)

    summary = {"config": cfg.values, "arms": {k: results[k] for k in results}}
    if len(results) >= 2:
        rows, cols = comparison_rows([(k, results[k]) for k in results])
        _atomic_write(out / "comparison.csv", table_csv(rows, cols))

    if sweep_values:
        if 0.0 not in sweep_values:
            sweep_values = [0.0] + sweep_values
        sweep_rows = []
        for lam in sorted(sweep_values):
            name = f"dsl_lambda={lam!r}"
            init = trained["baseline"] if cfg["experiment"]["warm_start"] and "baseline" in trained else (primal0, dual0)
            run_arm(name, (lam, lam), init)
            sweep_rows.append(dict(lam=lam, **{k: v for k, v in results[name].items()}))
        cols = ["lam"] + sorted(k for k in sweep_rows[0] if k != "lam")
        _atomic_write(out / "sweep.csv", table_csv(sweep_rows, cols))
        summary["sweep"] = {r["lam"]: {k: v for k, v in r.items() if k != "lam"} for r in sweep_rows}

    _atomic_write(out / "summary.json", _json(summary))
    return results


def load_summary(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        raise FileNotFoundError(f"{run_dir}: no summary.json (incomplete run?)")
    return json.loads(path.read_text())


def compare_runs(run_dirs: list[str | Path]) -> tuple[list[dict], list[str]]:
    """Align final metrics of every arm of every run; the first arm of the first dir is the reference."""
    if len(run_dirs) < 2:
        raise ValueError("compare needs at least two run directories")
    named = []
    for d in run_dirs:
        s = load_summary(d)
        for arm, metrics in s["arms"].items():
            named.append((f"{Path(d).name}/{arm}", {k: v for k, v in metrics.items() if _is_number(v)}))
    return comparison_rows(named)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and not (isinstance(v, float) and math.isnan(v))
