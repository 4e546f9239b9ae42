"""Command-line interface: subcommands, exit codes, determinism."""

import numpy as np
import pytest

import pilot
from pilot.cli import main
from pilot.data import write_csv
from pilot.evalharness import gen_additive


@pytest.fixture()
def train_csv(tmp_path):
    ds = gen_additive(200, seed=0, p=3, noise=0.4)
    path = str(tmp_path / "train.csv")
    write_csv(ds, path)
    return path, ds


class TestTrainPredict:
    def test_train_then_predict_matches_fitted_values(self, tmp_path, train_csv, capsys):
        path, ds = train_csv
        model = str(tmp_path / "m.json")
        preds_csv = str(tmp_path / "p.csv")
        assert main(["train", "--data", path, "--target", "y",
                     "--out", model]) == 0
        summary = capsys.readouterr().out
        assert "nodes=" in summary and "train_rss=" in summary
        assert main(["predict", "--model", model, "--data", path,
                     "--out", preds_csv]) == 0
        lines = open(preds_csv).read().splitlines()
        assert lines[0] == "prediction"
        got = np.array([float(v) for v in lines[1:]])
        tree = pilot.build_tree(ds)
        assert np.array_equal(got, tree.diagnostics.fitted_values)

    def test_cart_mode_flag(self, tmp_path, train_csv):
        path, _ = train_csv
        model = str(tmp_path / "m.json")
        assert main(["train", "--data", path, "--target", "y", "--mode",
                     "cart", "--out", model]) == 0
        tree = pilot.load_model(model)
        kinds = {n.fit.kind for n in pilot.iter_nodes(tree.root)}
        assert kinds <= {pilot.ModelKind.CON, pilot.ModelKind.PCON}

    def test_model_file_byte_deterministic(self, tmp_path, train_csv):
        path, _ = train_csv
        m1, m2 = str(tmp_path / "m1.json"), str(tmp_path / "m2.json")
        main(["train", "--data", path, "--target", "y", "--out", m1])
        main(["train", "--data", path, "--target", "y", "--out", m2])
        assert open(m1, "rb").read() == open(m2, "rb").read()


class TestUsageErrors:
    def test_max_depth_zero_is_usage_error(self, train_csv, tmp_path):
        path, _ = train_csv
        code = main(["train", "--data", path, "--target", "y",
                     "--max-depth", "0", "--out", str(tmp_path / "m.json")])
        assert code == 2

    def test_unknown_flag(self):
        assert main(["train", "--frobnicate"]) == 2

    def test_missing_subcommand(self):
        assert main([]) == 2

    def test_unreadable_file_is_runtime_error(self, tmp_path, capsys):
        code = main(["train", "--data", str(tmp_path / "nope.csv"),
                     "--target", "y", "--out", str(tmp_path / "m.json")])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_bad_target_is_runtime_error(self, train_csv, tmp_path, capsys):
        path, _ = train_csv
        code = main(["train", "--data", path, "--target", "nope",
                     "--out", str(tmp_path / "m.json")])
        assert code == 1
        assert "nope" in capsys.readouterr().err


class TestEval:
    def test_eval_twice_byte_identical(self, tmp_path, train_csv, capsys):
        path, _ = train_csv
        outs = []
        reports = []
        for name in ("r1.csv", "r2.csv"):
            rpt = str(tmp_path / name)
            code = main(["eval", "--data", path, "--target", "y",
                         "--folds", "5", "--seed", "7", "--out", rpt])
            assert code == 0
            outs.append(capsys.readouterr().out)
            reports.append(open(rpt, "rb").read())
        assert outs[0] == outs[1]
        assert reports[0] == reports[1]

    def test_unknown_method_rejected(self, train_csv, capsys):
        path, _ = train_csv
        code = main(["eval", "--data", path, "--target", "y",
                     "--methods", "pilot,m5"])
        assert code == 1
        assert "m5" in capsys.readouterr().err


class TestInspection:
    def test_importance_and_print(self, tmp_path, train_csv, capsys):
        path, _ = train_csv
        model = str(tmp_path / "m.json")
        main(["train", "--data", path, "--target", "y", "--out", model])
        capsys.readouterr()
        assert main(["importance", "--model", model]) == 0
        out = capsys.readouterr().out
        rows = [ln.split(",") for ln in out.splitlines()]
        assert [r[0] for r in rows] == ["x1", "x2", "x3"]
        total = sum(float(r[1]) for r in rows)
        assert total == pytest.approx(1.0, abs=1e-9)
        assert main(["print", "--model", model]) == 0
        text = capsys.readouterr().out
        assert text.strip()

    def test_version_mentions_schema(self, capsys):
        code = main(["--version"])
        assert code == 0
        assert "schema_version 1" in capsys.readouterr().out

    def test_threads_flag_accepted(self, tmp_path, train_csv):
        path, _ = train_csv
        model = str(tmp_path / "m.json")
        assert main(["train", "--data", path, "--target", "y",
                     "--threads", "4", "--out", model]) == 0
        assert main(["train", "--data", path, "--target", "y",
                     "--threads", "0", "--out", model]) == 2
