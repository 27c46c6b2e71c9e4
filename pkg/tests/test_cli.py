"""Batch driver: commands, config handling, artifact files, exit codes."""

import csv
import json

import numpy as np
import pytest

from blockgp import cli


def write_config(path, **kv):
    with open(path, "w") as f:
        f.write("# test job\n")
        for k, v in kv.items():
            f.write(f"{k} = {v}\n")
    return str(path)


def write_data(path, coords, y=None):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y"] if y is not None else ["x"])
        for k, c in enumerate(coords):
            row = [repr(float(c))]
            if y is not None:
                row.append(repr(float(y[k])))
            w.writerow(row)
    return str(path)


@pytest.fixture
def workdir(tmp_path):
    rng = np.random.default_rng(3)
    coords = np.sort(rng.uniform(0, 10, 25))
    y = np.sin(coords) + 0.1 * rng.standard_normal(25)
    write_data(tmp_path / "data.csv", coords, y)
    write_data(tmp_path / "grid.csv", np.linspace(1, 9, 6))
    write_config(tmp_path / "job.cfg", workers=3, seed=1,
                 kernel="matern-nugget", theta0="1.0,2.0,0.1",
                 data=tmp_path / "data.csv", pred_grid=tmp_path / "grid.csv")
    return tmp_path


class TestLoglik:
    def test_trivial_single_point(self, tmp_path, capsys):
        write_data(tmp_path / "one.csv", [0.0], [0.0])
        cfg = write_config(tmp_path / "c.cfg", workers=1, kernel="white",
                           theta0="1.0", data=tmp_path / "one.csv")
        assert cli.main(["loglik", cfg]) == 0
        out = capsys.readouterr().out
        assert "-0.9189" in out

    def test_matches_library_value(self, workdir, capsys):
        assert cli.main(["loglik", str(workdir / "job.cfg")]) == 0
        printed = float(capsys.readouterr().out.split()[-1])
        assert np.isfinite(printed)


class TestFit:
    def test_recovers_closed_form_mle(self, tmp_path):
        rng = np.random.default_rng(5)
        y = 1.3 * rng.standard_normal(100)
        write_data(tmp_path / "d.csv", np.arange(100.0), y)
        cfg = write_config(tmp_path / "c.cfg", workers=3, kernel="white",
                           theta0="1.0", data=tmp_path / "d.csv",
                           out=tmp_path / "fit.json")
        assert cli.main(["fit", cfg]) == 0
        doc = json.loads((tmp_path / "fit.json").read_text())
        mle = float(y @ y / 100)
        assert abs(doc["theta"][0] - mle) / mle <= 1e-4
        assert doc["converged"]
        assert doc["n_evals"] == len(doc["trace"])
        assert doc["log_density"] == max(t["log_density"]
                                         for t in doc["trace"])


class TestPredict:
    def test_csv_round_trip_exact(self, workdir):
        out = workdir / "pred.csv"
        assert cli.main(["predict", str(workdir / "job.cfg"),
                         f"out={out}", "se_fit=true"]) == 0
        with open(out, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["mean", "se"]
        assert len(rows) == 7
        parsed = np.array([[float(v) for v in r] for r in rows[1:]])
        # the repr-precision writer makes the file re-parse bit exactly
        from blockgp import spawn
        from blockgp.gp import KrigeProblem, builtin_spec
        data = np.loadtxt(workdir / "data.csv", delimiter=",", skiprows=1)
        grid = np.loadtxt(workdir / "grid.csv", delimiter=",", skiprows=1)
        cl = spawn(3, seed=1)
        try:
            spec = builtin_spec("matern-nugget", data[:, 0], grid)
            prob = KrigeProblem(cl, "job", spec, data[:, 1],
                                np.array([1.0, 2.0, 0.1]), m=6)
            mean, se = prob.predict(se_fit=True)
        finally:
            cl.shutdown()
        np.testing.assert_array_equal(parsed[:, 0], mean)
        np.testing.assert_array_equal(parsed[:, 1], se)

    def test_mean_only_by_default(self, workdir):
        out = workdir / "pred.csv"
        assert cli.main(["predict", str(workdir / "job.cfg"),
                         f"out={out}"]) == 0
        with open(out, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["mean"]


class TestSimulate:
    def test_conditional_shape(self, workdir):
        out = workdir / "sim.csv"
        assert cli.main(["simulate", str(workdir / "job.cfg"),
                         f"out={out}", "r=8"]) == 0
        with open(out, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == [f"sim{k}" for k in range(1, 9)]
        assert len(rows) == 7  # 6 prediction points + header

    def test_unconditional_shape(self, workdir):
        out = workdir / "sim.csv"
        assert cli.main(["simulate", str(workdir / "job.cfg"),
                         f"out={out}", "r=3", "post=false"]) == 0
        with open(out, newline="") as f:
            rows = list(csv.reader(f))
        assert len(rows) == 26  # 25 observations + header


class TestBenchChol:
    def test_sweep_writes_timing_csv(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "b.cfg", out=tmp_path / "bench.csv",
                           bench_n="48", bench_p="1,3,6", bench_h="1,2,3")
        assert cli.main(["bench-chol", cfg]) == 0
        with open(tmp_path / "bench.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["n", "P", "h", "seconds", "residual"]
        assert len(rows) == 10  # 1 x 3 x 3 sweep
        for row in rows[1:]:
            assert float(row[4]) <= 1e-10  # every residual check passes


class TestDeterminism:
    def test_identical_config_gives_identical_files(self, workdir):
        outs = []
        for k in range(2):
            fit = workdir / f"fit{k}.json"
            pred = workdir / f"pred{k}.csv"
            sim = workdir / f"sim{k}.csv"
            assert cli.main(["fit", str(workdir / "job.cfg"),
                             f"out={fit}", "max_evals=40"]) == 0
            assert cli.main(["predict", str(workdir / "job.cfg"),
                             f"out={pred}", "se_fit=true"]) == 0
            assert cli.main(["simulate", str(workdir / "job.cfg"),
                             f"out={sim}", "r=5"]) == 0
            outs.append((fit.read_bytes(), pred.read_bytes(),
                         sim.read_bytes()))
        assert outs[0] == outs[1]


class TestExitCodes:
    def test_missing_config_file(self, capsys):
        assert cli.main(["loglik", "/nonexistent.cfg"]) == 2

    def test_missing_required_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.cfg", workers=3)
        assert cli.main(["loglik", cfg]) == 2

    def test_malformed_line(self, tmp_path, capsys):
        (tmp_path / "c.cfg").write_text("this is not a key value pair\n")
        assert cli.main(["loglik", str(tmp_path / "c.cfg")]) == 2

    def test_bad_theta_count(self, workdir, capsys):
        assert cli.main(["loglik", str(workdir / "job.cfg"),
                         "theta0=1.0"]) == 2

    def test_non_triangular_worker_count(self, workdir, capsys):
        assert cli.main(["loglik", str(workdir / "job.cfg"),
                         "workers=4"]) == 2

    def test_numerical_error_echoes_theta(self, tmp_path, capsys):
        # duplicated points without a nugget: singular covariance
        write_data(tmp_path / "d.csv", [1.0, 1.0, 2.0], [0.5, 0.7, 0.1])
        cfg = write_config(tmp_path / "c.cfg", workers=1, kernel="matern",
                           theta0="1.0,2.0", data=tmp_path / "d.csv")
        assert cli.main(["loglik", cfg]) == 3
        err = capsys.readouterr().err
        assert "1.0,2.0" in err

    def test_backend_failure(self, workdir, capsys):
        assert cli.main(["loglik", str(workdir / "job.cfg"),
                         "backend=carrier-pigeon"]) == 4

    def test_pred_grid_with_response_column_rejected(self, workdir, capsys):
        assert cli.main(["predict", str(workdir / "job.cfg"),
                         f"pred_grid={workdir / 'data.csv'}",
                         f"out={workdir / 'p.csv'}"]) == 2


def test_help_documents_config_keys(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for key in ("workers", "backend", "kernel", "theta0", "pred_grid",
                "bench_n", "blas_threads", "seed"):
        assert key in out
