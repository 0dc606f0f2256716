import csv
import hashlib
import json

import numpy as np
import pytest

from triwin.cli import main

ONE_CONFIG = json.dumps(dict(sigma2=[1.0], C=[1.0], c13=[1.0], c24=[1.0], k=[3]))


@pytest.fixture
def toy(write_manifest):
    rng = np.random.default_rng(3)
    rows = [[*np.round(rng.normal(2.0, 1.0, 2), 5), "p"] for _ in range(8)]
    rows += [[*np.round(rng.normal(0.0, 1.0, 2), 5), "n"] for _ in range(32)]
    return write_manifest(rows, ["x", "y", "cls"], "cls", ["p"], ["n"], normalize=True)


def read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestBench:
    def test_row_count_and_summary(self, toy, tmp_path):
        out = tmp_path / "o"
        out.mkdir()
        code = main(["bench", "--manifests", str(toy), "--algorithms", "svm", "twftsvm",
                     "--folds", "2", "--grid", ONE_CONFIG, "--out", str(out)])
        assert code == 0
        rows = read(out / "results.csv")
        # one row per dataset x algorithm x fold, se and sp as columns
        assert len(rows) == 1 * 2 * 2
        assert sorted((r["algorithm"], r["fold"]) for r in rows) == [
            ("svm", "0"), ("svm", "1"), ("twftsvm", "0"), ("twftsvm", "1")]
        summary = read(out / "summary.csv")
        assert [r["algorithm"] for r in summary] == ["svm", "twftsvm"]
        for r in summary:
            assert 0.0 <= float(r["mean"]) <= 1.0

    def test_unknown_algorithm(self, toy, tmp_path, capsys):
        code = main(["bench", "--manifests", str(toy), "--algorithms", "xgboost",
                     "--out", str(tmp_path)])
        assert code == 1
        err = capsys.readouterr().err
        assert "xgboost" in err and "twftsvm" in err

    def test_usage_error_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["bench"])
        assert exc.value.code == 1

    def test_missing_file(self, tmp_path):
        assert main(["bench", "--manifests", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path)]) == 1

    def test_inputs_untouched(self, toy, tmp_path):
        src = toy.with_suffix(".csv")
        before = digest(src), digest(toy)
        main(["bench", "--manifests", str(toy), "--algorithms", "svm", "--folds", "2",
              "--grid", ONE_CONFIG, "--out", str(tmp_path)])
        assert (digest(src), digest(toy)) == before

    def test_repeatable(self, toy, tmp_path):
        outs = []
        for name in ("a", "b"):
            d = tmp_path / name
            d.mkdir()
            main(["bench", "--manifests", str(toy), "--algorithms", "fsvm", "tsvm", "--folds",
                  "3", "--grid", "quick", "--seed", "11", "--out", str(d)])
            outs.append((d / "results.csv").read_bytes())
        assert outs[0] == outs[1]


class TestStats:
    def test_rank_mode(self, capsys):
        ranks = ["5.72", "4.14", "5.26", "4.84", "4.94", "5.72", "4.00", "1.38"]
        assert main(["stats", "--ranks", *ranks, "--n", "25"]) == 0
        text = capsys.readouterr().out
        assert "58.24" in text and "11.97" in text and "1.93" in text

    def test_rank_mode_needs_n(self):
        assert main(["stats", "--ranks", "1", "2", "3"]) == 1

    def test_from_summary(self, tmp_path, capsys):
        path = tmp_path / "summary.csv"
        lines = ["dataset,algorithm,mean,std,best_params"]
        for d, vals in [("d1", (0.9, 0.8, 0.7)), ("d2", (0.6, 0.9, 0.5)),
                        ("d3", (0.8, 0.7, 0.6)), ("d4", (0.9, 0.6, 0.7))]:
            lines += [f"{d},{a},{v},0,{{}}" for a, v in zip("ABC", vals)]
        path.write_text("\n".join(lines) + "\n")
        assert main(["stats", str(path)]) == 0
        assert "A" in capsys.readouterr().out

    def test_missing_cell(self, tmp_path):
        path = tmp_path / "summary.csv"
        path.write_text("dataset,algorithm,mean,std,best_params\n"
                        "d1,A,0.9,0,{}\nd1,B,0.8,0,{}\nd2,A,0.7,0,{}\n")
        assert main(["stats", str(path)]) == 1


class TestIrSweep:
    def test_files_and_identity_row(self, write_manifest, tmp_path):
        rng = np.random.default_rng(5)
        rows = [[*np.round(rng.normal(2.0, 1.0, 2), 5), 1] for _ in range(20)]
        rows += [[*np.round(rng.normal(0.0, 1.0, 2), 5), 0] for _ in range(40)]
        man = write_manifest(rows, ["x", "y", "label"], -1, [1], [0], name="base")
        out = tmp_path / "sweep"
        code = main(["irsweep", "--manifests", str(man), "--algorithms", "svm", "--folds", "2",
                     "--grid", ONE_CONFIG, "--out", str(out)])
        assert code == 0
        irs = [r["ir"] for r in read(out / "irsweep_summary.csv")]
        assert irs == ["2", "3", "4", "5", "6", "7", "8"]
        for g in irs:
            assert (out / f"base_ir{g}.csv").exists()
        # IR 2 is the original ratio: every row survives
        assert len((out / "base_ir2.csv").read_text().splitlines()) == 61
        plot = read(out / "irsweep_plot.csv")
        assert {r["algorithm"] for r in plot} == {"svm"}

    def test_unreachable_ratio_skipped(self, write_manifest, tmp_path):
        rows = [[i, 0.5 * i, 1] for i in range(6)] + [[i, -i, 0] for i in range(30)]
        man = write_manifest(rows, ["x", "y", "label"], -1, [1], [0], name="small")
        out = tmp_path / "s"
        main(["irsweep", "--manifests", str(man), "--algorithms", "svm", "--folds", "2",
              "--grid", ONE_CONFIG, "--irs", "5", "8", "--out", str(out)])
        assert [r["ir"] for r in read(out / "irsweep_summary.csv")] == ["5"]


class TestMembership:
    def test_one_row_per_sample(self, toy, capsys):
        assert main(["membership", str(toy), "--k", "5"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("sample_index,")
        body = list(csv.reader(lines[1:]))
        assert len(body) == 40
        for r in body:
            s = float(r[-1])
            assert 0.0 < s <= 1.0
            if r[1] == "1":
                assert s == 1.0

    def test_file_output(self, toy, tmp_path):
        out = tmp_path / "m.csv"
        assert main(["membership", str(toy), "--k", "3", "--sigma2", "0.5",
                     "--out", str(out)]) == 0
        assert len(read(out)) == 40

    def test_k_too_large(self, toy):
        assert main(["membership", str(toy), "--k", "40"]) == 1

    def test_empty_class(self, write_manifest):
        man = write_manifest([[0, "a"], [1, "a"]], ["x", "c"], "c", ["a"], ["b"])
        assert main(["membership", str(man)]) == 1


class TestSweep:
    def test_one_row_per_value(self, toy, tmp_path):
        grid = json.dumps(dict(sigma2=[1.0], c13=[1.0], c24=[1.0], k=[3, 5, 7]))
        assert main(["sweep", "--manifests", str(toy), "--folds", "2", "--grid", grid,
                     "--param", "k", "--out", str(tmp_path)]) == 0
        rows = read(tmp_path / "sweep_k.csv")
        assert [r["value"] for r in rows] == ["3", "5", "7"]
        for r in rows:
            assert json.loads(r["best_params"])["k"] == int(r["value"])
