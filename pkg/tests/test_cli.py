import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ibart import cli
from ibart.core import ContractError, HyperParams


def _table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _dir_bytes(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = fh.read()
    return out


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def friedman_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--dgp", "friedman", "--n", 60, "--p", 6, "--seed", 1, "--out", out) == 0
    return out / "data.csv"


@pytest.fixture(scope="module")
def fitted(friedman_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert run("fit", "--data", friedman_csv, "--iters", 60, "--burnin", 20, "--seed", 3,
               "--vars", "x3", "--retain-ensembles", "--quiet", "--out", out) == 0
    return out


class TestSimulate:
    def test_friedman_shape(self, tmp_path):
        assert run("simulate", "--dgp", "friedman", "--n", 300, "--p", 30, "--seed", 1,
                   "--out", tmp_path) == 0
        header, rows = _table(tmp_path / "data.csv")
        assert len(header) == 31 and len(rows) == 300
        assert header[-1] == "y"
        truth_header, truth_rows = _table(tmp_path / "truth.csv")
        assert "f" in truth_header and len(truth_rows) == 300

    def test_causal_truth(self, tmp_path):
        assert run("simulate", "--dgp", "causal", "--n", 500, "--seed", 2, "--out", tmp_path) == 0
        header, _ = _table(tmp_path / "data.csv")
        assert header[0] == "T"
        truth = json.loads((tmp_path / "truth.json").read_text())
        assert truth["ate"] == 1.0

    def test_missing_n_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("simulate", "--dgp", "friedman", "--out", tmp_path)
        assert exc.value.code != 0

    def test_invalid_spec_exits_nonzero(self, tmp_path):
        assert run("simulate", "--dgp", "friedman", "--n", 10, "--p", 3, "--out", tmp_path) != 0


class TestConfig:
    def test_defaults(self):
        hp = HyperParams()
        assert (hp.iterations, hp.burn_in, hp.thin) == (5000, 1000, 1)
        assert (hp.alpha, hp.beta, hp.nu, hp.lam) == (0.95, 2.0, 3.0, 0.74)
        assert (hp.a_eta, hp.b_eta, hp.a_delta, hp.b_delta, hp.a_gamma, hp.b_gamma) == \
            (0.05, 0.01, 0.1, 0.01, 0.05, 0.01)

    def test_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("# comment\nalpha = 0.5\niterations = 10\nk_trunc = 4\nburn_in=3\n")
        args = cli.build_parser().parse_args(["fit", "--data", "x", "--out", "o",
                                              "--config", str(cfg), "--iters", "20"])
        hp, sc = cli.resolve_settings(args)
        assert hp.alpha == 0.5 and hp.iterations == 20 and hp.burn_in == 3
        assert sc == {"k_trunc": 4}

    @pytest.mark.parametrize("text", ["alpha 0.5\n", "bogus = 1\n", "alpha = high\n",
                                      "plug_in = maybe\n"])
    def test_bad_file(self, tmp_path, text):
        cfg = tmp_path / "c.txt"
        cfg.write_text(text)
        with pytest.raises(ContractError):
            cli.parse_config(cfg)

    def test_invalid_value_rejected_before_sampling(self, tmp_path, friedman_csv):
        cfg = tmp_path / "c.txt"
        cfg.write_text("alpha = 1.5\n")
        out = tmp_path / "run"
        assert run("fit", "--data", friedman_csv, "--config", cfg, "--out", out) != 0
        assert not out.exists()

    def test_trees_needs_classic(self, friedman_csv, tmp_path):
        with pytest.raises(SystemExit):
            run("fit", "--data", friedman_csv, "--trees", 5, "--out", tmp_path)

    def test_resolve_columns(self):
        assert cli.resolve_columns(["x2", "1", " "], ["x1", "x2"]) == [1, 0]
        with pytest.raises(ContractError):
            cli.resolve_columns(["x9"], ["x1", "x2"])

    def test_thread_cap(self, monkeypatch):
        monkeypatch.setenv("IBART_THREADS", "1")
        assert cli._workers(8) == 1


class TestFit:
    def test_outputs(self, fitted):
        names = set(os.listdir(fitted))
        assert {"manifest.json", "trace.jsonl", "summary.csv", "summary.txt",
                "variable_importance.csv", "fit.csv", "pdp.csv", "ensembles.txt"} <= names
        m = json.loads((fitted / "manifest.json").read_text())
        assert set(m["artifacts"]) <= names
        assert m["inputs"]["data"]["digest"].startswith("sha256:")
        assert m["config"]["iterations"] == 60
        lines = (fitted / "trace.jsonl").read_text().splitlines()
        assert len(lines) == 60
        header, rows = _table(fitted / "fit.csv")
        assert header == ["row", "y", "f_mean", "f_lower", "f_upper"] and len(rows) == 60

    def test_classic_tree_count(self, friedman_csv, tmp_path):
        assert run("fit", "--data", friedman_csv, "--mode", "classic", "--trees", 7, "--iters", 15,
                   "--burnin", 5, "--quiet", "--out", tmp_path) == 0
        recs = [json.loads(x) for x in (tmp_path / "trace.jsonl").read_text().splitlines()]
        assert {r["K_n"] for r in recs} == {7}
        assert all(r["gamma"] is None for r in recs)

    def test_missing_target(self, friedman_csv, tmp_path):
        assert run("fit", "--data", friedman_csv, "--target", "nope", "--out", tmp_path) != 0

    def test_determinism_across_processes(self, friedman_csv, tmp_path):
        dirs = []
        for name in ("a", "b"):
            out = tmp_path / name
            subprocess.run([sys.executable, "-m", "ibart.cli", "fit", "--data", str(friedman_csv),
                            "--iters", "30", "--burnin", "10", "--seed", "11", "--quiet",
                            "--retain-ensembles", "--out", str(out)],
                           check=True, capture_output=True)
            dirs.append(_dir_bytes(out))
        assert dirs[0] == dirs[1]


class TestFollowups:
    def test_predict_classic_on_training_rows(self, friedman_csv, tmp_path):
        assert run("fit", "--data", friedman_csv, "--mode", "classic", "--trees", 10,
                   "--iters", 40, "--burnin", 10, "--retain-ensembles", "--quiet",
                   "--out", tmp_path) == 0
        assert run("predict", "--out", tmp_path, "--data", friedman_csv) == 0
        _, rows = _table(tmp_path / "predict_mse.csv")
        pred = dict((r[0], float(r[1])) for r in rows)
        _, summ = _table(tmp_path / "summary.csv")
        ins = dict((r[0], float(r[1])) for r in summ if r[0].startswith("mse"))
        assert pred["standardized"] == pytest.approx(ins["mse_insample"], rel=1e-12)
        assert pred["original"] == pytest.approx(ins["mse_insample_original"], rel=1e-12)

    def test_predict_schema_mismatch(self, fitted, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x1,x2,y\n0.1,0.2,1\n")
        assert run("predict", "--out", fitted, "--data", bad) != 0

    def test_predict_without_target(self, fitted, friedman_csv, tmp_path):
        header, rows = _table(friedman_csv)
        new = tmp_path / "new.csv"
        with open(new, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header[:-1])
            w.writerows(r[:-1] for r in rows[:5])
        assert run("predict", "--out", fitted, "--data", new) == 0
        h, pr = _table(fitted / "predictions.csv")
        assert h == ["row", "mean", "lower", "upper"] and len(pr) == 5

    def test_pdp_never_split_variable_is_constant(self, friedman_csv, tmp_path):
        # a single root-only tree can never split on anything
        cfg = tmp_path / "c.txt"
        cfg.write_text("alpha = 1e-12\n")
        out = tmp_path / "run"
        assert run("fit", "--data", friedman_csv, "--mode", "classic", "--trees", 3,
                   "--config", cfg, "--iters", 20, "--burnin", 5, "--retain-ensembles",
                   "--quiet", "--out", out) == 0
        assert run("pdp", "--out", out, "--vars", "x6,x1", "--grid-points", 5) == 0
        _, rows = _table(out / "pdp.csv")
        for var in ("x6", "x1"):
            means = {r[2] for r in rows if r[0] == var}
            assert len(means) == 1
        m = json.loads((out / "manifest.json").read_text())
        assert m["followups"][0]["command"] == "pdp" and "pdp.csv" in m["artifacts"]

    def test_ate(self, tmp_path):
        sim = tmp_path / "sim"
        assert run("simulate", "--dgp", "causal", "--n", 80, "--seed", 4, "--out", sim) == 0
        out = tmp_path / "run"
        assert run("fit", "--data", sim / "data.csv", "--treatment", "T", "--iters", 40,
                   "--burnin", 10, "--retain-ensembles", "--quiet", "--out", out) == 0
        _, rows = _table(out / "ate.csv")
        stats = dict((r[0], float(r[1])) for r in rows)
        assert stats["lower"] <= stats["mean"] <= stats["upper"] and stats["draws"] == 40
        assert run("ate", "--out", out, "--treatment", "T") == 0
        _, draws = _table(out / "ate_draws.csv")
        assert len(draws) == 40

    def test_needs_ensembles(self, friedman_csv, tmp_path):
        assert run("fit", "--data", friedman_csv, "--iters", 5, "--burnin", 2, "--quiet",
                   "--out", tmp_path) == 0
        assert run("pdp", "--out", tmp_path, "--vars", "x1") != 0

    def test_not_a_run_directory(self, tmp_path):
        assert run("pdp", "--out", tmp_path, "--vars", "x1") != 0


class TestBench:
    def test_single_replicate_no_mean_row(self, tmp_path):
        assert run("bench", "--dgp", "friedman", "--n", 40, "--p", 5, "--replicates", 1,
                   "--iters", 20, "--burnin", 5, "--trees", 5, "--out", tmp_path) == 0
        header, rows = _table(tmp_path / "bench.csv")
        assert header[:3] == ["replicate", "mse_infinite", "mse_classic"]
        assert len(rows) == 1 and rows[0][0] == "1"

    def test_mean_row(self, tmp_path, monkeypatch):
        monkeypatch.setenv("IBART_THREADS", "1")
        assert run("bench", "--dgp", "friedman", "--n", 40, "--p", 5, "--replicates", 2,
                   "--mode", "classic", "--iters", 10, "--burnin", 5, "--trees", 5,
                   "--out", tmp_path) == 0
        _, rows = _table(tmp_path / "bench.csv")
        assert [r[0] for r in rows] == ["1", "2", "mean"]
        vals = np.array([[float(v) for v in r[1:]] for r in rows])
        np.testing.assert_allclose(vals[2], vals[:2].mean(axis=0))

    def test_parallel_matches_serial(self):
        from ibart.data import DgpSpec
        spec = DgpSpec("friedman", 40, 5)
        hp = HyperParams(iterations=10, burn_in=5, classic_K=5)
        a = cli.run_bench(spec, 2, ("infinite", "classic"), hp, seed=5, workers=1)
        b = cli.run_bench(spec, 2, ("infinite", "classic"), hp, seed=5, workers=2)
        assert a == b

    def test_needs_source(self, tmp_path):
        with pytest.raises(SystemExit):
            run("bench", "--out", tmp_path)
