import csv
import json

import numpy as np
import pytest

from bnsens.cli import main
from bnsens.data import read_encoded


def write_tokens(path, dataset):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dataset.column_names)
        for row in dataset.data:
            w.writerow("abcdefgh"[v] for v in row)
    return str(path)


@pytest.fixture
def example_csv(tmp_path, worked_example):
    return write_tokens(tmp_path / "example.csv", worked_example)


@pytest.fixture
def small_csv(tmp_path, rng):
    from conftest import random_dataset
    return write_tokens(tmp_path / "small.csv", random_dataset(rng, 4, 80))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_learn_writes_outputs(tmp_path, small_csv):
    out = tmp_path / "learn"
    assert main(["learn", "--data", small_csv, "--alpha", "1", "--out", str(out),
                 "--dump-scores"]) == 0
    dag = json.loads((out / "dag.json").read_text())
    assert dag["n"] == 4
    assert (out / "dag.dot").read_text().startswith("digraph")
    assert len(read_csv(out / "scores.csv")) == 1 + 4 * 8
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "learn" and "dag.json" in manifest["outputs"]


def test_missing_alpha_is_usage_error(tmp_path, small_csv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["learn", "--data", small_csv, "--out", str(tmp_path / "x")])
    assert exc.value.code == 2


def test_bad_alpha_is_usage_error(tmp_path, small_csv):
    with pytest.raises(SystemExit) as exc:
        main(["learn", "--data", small_csv, "--alpha", "-1", "--out", str(tmp_path / "x")])
    assert exc.value.code == 2


def test_too_many_variables(tmp_path, capsys):
    path = tmp_path / "wide.csv"
    rng = np.random.default_rng(0)
    with open(path, "w") as fh:
        fh.write(",".join(f"c{i}" for i in range(25)) + "\n")
        for _ in range(10):
            fh.write(",".join("ab"[v] for v in rng.integers(0, 2, 25)) + "\n")
    rc = main(["learn", "--data", str(path), "--alpha", "1", "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "capacity" in capsys.readouterr().err


def test_missing_file(tmp_path, capsys):
    rc = main(["learn", "--data", str(tmp_path / "nope.csv"), "--alpha", "1",
               "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "error" in capsys.readouterr().err


class TestSweep:
    def test_singleton_grid(self, tmp_path, small_csv):
        out = tmp_path / "s"
        assert main(["sweep", "--data", small_csv, "--alphas", "list:2", "--out", str(out)]) == 0
        rows = read_csv(out / "sweep.csv")
        assert rows[0] == ["alpha", "log_score", "arc_count", "equivalence_key_hash",
                           "dag_json_ref"]
        assert len(rows) == 2
        assert (out / rows[1][4]).exists()

    def test_byte_identical_reruns(self, tmp_path, small_csv):
        outs = []
        for name, threads in (("a", "1"), ("b", "3")):
            out = tmp_path / name
            assert main(["sweep", "--data", small_csv, "--alphas", "log:0.01:100:9",
                         "--threads", threads, "--out", str(out)]) == 0
            outs.append(out)
        for f in ("sweep.csv", "summary.json"):
            assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
        m0, m1 = (json.loads((o / "manifest.json").read_text()) for o in outs)
        m0.pop("argv"), m1.pop("argv")
        assert m0 == m1

    def test_integer_grid_summary(self, tmp_path, small_csv):
        out = tmp_path / "s"
        assert main(["sweep", "--data", small_csv, "--alphas", "int:1:100",
                     "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["grid_range"] == [1.0, 100.0]
        assert summary["max_possible_arcs"] == 6
        assert len(read_csv(out / "sweep.csv")) == 101

    def test_malformed_grid(self, tmp_path, small_csv):
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--data", small_csv, "--alphas", "log:1:2", "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestDecompose:
    def test_worked_example(self, tmp_path, example_csv):
        out = tmp_path / "d"
        assert main(["decompose", "--data", example_csv, "--child", "V8", "--parents", "V11",
                     "--new-parent", "V3", "--alpha", "1", "--out", str(out)]) == 0
        doc = json.loads((out / "decomposition.json").read_text())
        (d,) = doc["decompositions"]
        assert d["net"] == pytest.approx(-0.09, abs=0.015)
        assert d["net"] == pytest.approx(d["local_score_difference"], abs=1e-9)
        assert (doc["r"], doc["q"], doc["K"]) == (3, 2, 3)

    def test_grid_rows(self, tmp_path, example_csv):
        out = tmp_path / "d"
        assert main(["decompose", "--data", example_csv, "--child", "V8", "--parents", "V11",
                     "--new-parent", "V3", "--alpha-grid", "log:0.01:100:5",
                     "--out", str(out)]) == 0
        pen = read_csv(out / "penalty_curve.csv")
        gain = read_csv(out / "gain_curve.csv")
        assert len(pen) == len(gain) == 6
        assert gain[0] == ["alpha", "alpha_per_config", "gain_0", "gain_1", "net"]

    def test_binary_free_parent_of_one_value(self, tmp_path):
        path = tmp_path / "k1.csv"
        path.write_text("a,b\n" + "x,z\ny,z\ny,z\n")
        out = tmp_path / "d"
        assert main(["decompose", "--data", str(path), "--child", "a", "--new-parent", "b",
                     "--alpha-grid", "int:1:3", "--out", str(out)]) == 0
        for row in read_csv(out / "penalty_curve.csv")[1:]:
            assert float(row[2]) == 0.0 and float(row[3]) == 0.0

    def test_child_among_parents(self, tmp_path, example_csv):
        with pytest.raises(SystemExit) as exc:
            main(["decompose", "--data", example_csv, "--child", "V8", "--parents", "V8",
                  "--new-parent", "V3", "--alpha", "1", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_unknown_column(self, tmp_path, example_csv):
        with pytest.raises(SystemExit) as exc:
            main(["decompose", "--data", example_csv, "--child", "nope",
                  "--new-parent", "V3", "--alpha", "1", "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestSelect:
    def test_single_model(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("a\nx\ny\nx\n")
        out = tmp_path / "s"
        assert main(["select", "--data", str(path), "--alphas", "int:1:5", "--out", str(out)]) == 0
        post = json.loads((out / "posterior.json").read_text())
        assert post["posterior"] == [1.0]
        assert post["agrees_with_maximization"] is True

    def test_maximize_singleton(self, tmp_path, small_csv):
        out = tmp_path / "s"
        assert main(["select", "--data", small_csv, "--method", "maximize",
                     "--alphas", "list:3", "--out", str(out)]) == 0
        sel = json.loads((out / "selection.json").read_text())
        assert sel["alpha_star"] == 3.0
        assert not (out / "posterior.json").exists()
        assert "agrees_with_integration" in sel

    def test_both(self, tmp_path, small_csv):
        out = tmp_path / "s"
        assert main(["select", "--data", small_csv, "--alphas", "log:0.1:50:6",
                     "--out", str(out)]) == 0
        post = json.loads((out / "posterior.json").read_text())
        assert sum(post["posterior"]) == pytest.approx(1.0, abs=1e-12)
        assert (out / "selected.json").exists() and (out / "posterior_winner.json").exists()


class TestPrep:
    def test_deterministic(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("x,y\n1.0,a\n?,b\n3.5,\n2.0,a\n0.5,b\n")
        outs = []
        for name in ("p1", "p2"):
            out = tmp_path / name
            assert main(["prep", "--data", str(path), "--seed", "7", "--out", str(out)]) == 0
            outs.append(out)
        assert (outs[0] / "encoded.csv").read_bytes() == (outs[1] / "encoded.csv").read_bytes()
        ds = read_encoded(outs[0] / "encoded.csv")
        assert ds.n_rows == 5 and ds.column_names == ("x", "y")

    def test_no_seed_needed_without_missing(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("x,y\n1.0,a\n2.0,b\n")
        assert main(["prep", "--data", str(path), "--out", str(tmp_path / "p")]) == 0

    def test_missing_needs_seed(self, tmp_path, capsys):
        path = tmp_path / "raw.csv"
        path.write_text("x,y\n1.0,a\n?,b\n")
        assert main(["prep", "--data", str(path), "--out", str(tmp_path / "p")]) == 1

    def test_all_missing_column(self, tmp_path, capsys):
        path = tmp_path / "raw.csv"
        path.write_text("x,empty\n1.0,?\n2.0,\n")
        rc = main(["prep", "--data", str(path), "--seed", "1", "--out", str(tmp_path / "p")])
        assert rc == 1
        assert "empty" in capsys.readouterr().err

    def test_encoded_round_trip(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("x,y\n1.0,a\n4.0,b\n2.5,a\n")
        out = tmp_path / "p"
        assert main(["prep", "--data", str(path), "--out", str(out)]) == 0
        out2 = tmp_path / "p2"
        assert main(["prep", "--data", str(out / "encoded.csv"), "--out", str(out2)]) == 0
        assert (out / "encoded.csv").read_bytes() == (out2 / "encoded.csv").read_bytes()


def test_rerun_reproduces(tmp_path, small_csv):
    out = tmp_path / "orig"
    assert main(["sweep", "--data", small_csv, "--alphas", "log:0.1:10:4", "--out", str(out)]) == 0
    again = tmp_path / "again"
    assert main(["rerun", str(out / "manifest.json"), "--out", str(again)]) == 0
    for f in ("sweep.csv", "summary.json", "manifest.json"):
        assert (out / f).read_bytes() == (again / f).read_bytes()


def test_rerun_bad_manifest(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("{}")
    assert main(["rerun", str(bad)]) == 1
