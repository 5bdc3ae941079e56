import csv
import json

import pytest

from dualsl.cli import main
from dualsl.experiment import ConfigError, parse_config

SMALL = """[experiment]
seed = 3
arms = {arms}
{extra}
[task]
family = tabular
vx = 4
vy = 4
n_train = 30
n_valid = 20
n_test = 100

[train]
max_epochs = 8
eval_decode = false
"""


def write_config(tmp_path, arms="baseline, dsl", extra="", name="c.ini"):
    path = tmp_path / name
    path.write_text(SMALL.format(arms=arms, extra=extra))
    return path


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


class TestRun:
    def test_single_arm(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", str(write_config(tmp_path, arms="baseline")), "-o", str(out)]) == 0
        assert sorted(p.name for p in out.glob("*.csv")) == ["baseline.csv"]
        assert not (out / "comparison.csv").exists()

    def test_two_arms_and_config_echo(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", str(cfg), "-o", str(out)]) == 0
        assert (out / "config.ini").read_text() == cfg.read_text()
        rows = read_csv(out / "comparison.csv")
        assert [r["run"] for r in rows] == ["baseline", "dsl"]
        assert float(rows[0]["d_kl"]) == 0.0
        assert rows[1]["d_kl"] != ""
        # rerunning from the echoed config reproduces every output
        again = tmp_path / "again"
        assert main(["run", str(out / "config.ini"), "-o", str(again)]) == 0
        for p in out.iterdir():
            assert (again / p.name).read_bytes() == p.read_bytes()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", str(cfg), "-o", str(a)]) == 0
        assert main(["run", str(cfg), "-o", str(b)]) == 0
        for name in ("baseline.csv", "dsl.csv", "comparison.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestSweep:
    def test_anchor_row_matches_baseline(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, extra="lambda_sweep = 0.001, 0.01, 0.1")
        assert main(["sweep", str(cfg), "-o", str(out)]) == 0
        rows = read_csv(out / "sweep.csv")
        assert [float(r["lam"]) for r in rows] == [0.0, 0.001, 0.01, 0.1]
        summary = json.loads((out / "summary.json").read_text())
        base = summary["arms"]["baseline"]
        for k, v in base.items():
            assert float(rows[0][k]) == pytest.approx(v, abs=1e-9)

    def test_default_list_includes_zero(self, tmp_path):
        out = tmp_path / "out"
        assert main(["sweep", str(write_config(tmp_path, arms="dsl")), "-o", str(out)]) == 0
        assert float(read_csv(out / "sweep.csv")[0]["lam"]) == 0.0


class TestConfigErrors:
    def test_unknown_key(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[train]\nlearning_rate = 0.1\n")
        assert main(["run", str(path), "-o", str(tmp_path / "o")]) == 1
        assert "train.learning_rate" in capsys.readouterr().err

    def test_bad_value(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[train]\nbatch_size = many\n")
        assert main(["run", str(path)]) == 1
        assert "train.batch_size" in capsys.readouterr().err

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="gpu"):
            parse_config("[gpu]\ncount = 1\n")

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.ini")]) == 1


class TestCompare:
    def _run(self, tmp_path, name, seed_extra=""):
        out = tmp_path / name
        main(["run", str(write_config(tmp_path, arms="dsl", extra=seed_extra, name=name + ".ini")), "-o", str(out)])
        return out

    def test_identical_runs(self, tmp_path, capsys):
        a, b = self._run(tmp_path, "a"), self._run(tmp_path, "b")
        capsys.readouterr()
        table = tmp_path / "cmp.csv"
        assert main(["compare", str(a), str(b), "-o", str(table)]) == 0
        rows = read_csv(table)
        deltas = [float(v) for r in rows for k, v in r.items() if k.startswith("d_")]
        assert deltas and all(d == 0.0 for d in deltas)
        assert capsys.readouterr().out == table.read_text()

    def test_reference_is_first(self, tmp_path):
        runs = [self._run(tmp_path, "a"), self._run(tmp_path, "b"), self._run(tmp_path, "c", "warm_start = false")]
        table = tmp_path / "cmp.csv"
        assert main(["compare", *map(str, runs), "-o", str(table)]) == 0
        rows = read_csv(table)
        assert rows[0]["run"] == "a/dsl"
        assert all(float(v) == 0.0 for k, v in rows[0].items() if k.startswith("d_"))

    def test_schema_mismatch(self, tmp_path, capsys):
        a = self._run(tmp_path, "a")
        b = tmp_path / "b"
        b.mkdir()
        summary = json.loads((a / "summary.json").read_text())
        del summary["arms"]["dsl"]["kl"]
        (b / "summary.json").write_text(json.dumps(summary))
        assert main(["compare", str(a), str(b), "-o", str(tmp_path / "x.csv")]) == 1
        assert "kl" in capsys.readouterr().err

    def test_incomplete_run(self, tmp_path):
        a = self._run(tmp_path, "a")
        assert main(["compare", str(a), str(tmp_path), "-o", str(tmp_path / "x.csv")]) == 1


class TestGradcheck:
    def test_passes(self, tmp_path, capsys):
        path = tmp_path / "g.ini"
        path.write_text("[task]\nfamily = classify\nvocab = 5\nmin_len = 2\nmax_len = 4\nn_train = 20\n"
                        "n_valid = 5\nn_test = 5\n[model.yx]\nhidden = 3\n")
        assert main(["gradcheck", str(path), "-n", "5"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "max relative error" in out


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    import dualsl.cli as cli
    from dualsl.trainer import NumericFailure

    def boom(cfg, out, sweep=False):
        out.mkdir(parents=True, exist_ok=True)
        (out / "baseline.csv").write_text("epoch\n0\n")
        raise NumericFailure("non-finite loss at training example 7 (xy)")

    monkeypatch.setattr(cli, "run_experiment", boom)
    out = tmp_path / "o"
    assert main(["run", str(write_config(tmp_path)), "-o", str(out)]) == 2
    assert "training example 7" in (out / "FAILED").read_text()
    assert (out / "baseline.csv").exists()
