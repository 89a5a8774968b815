#
#  test_cli.py
#

import json

import numpy as np
import pytest

from klfactor import __version__, cli, files


@pytest.fixture(autouse=True)
def quiet_logging(monkeypatch):
    monkeypatch.delenv("KLFACTOR_LOG", raising=False)


def _write(path, text):
    path.write_text(text)
    return str(path)


def _pod_inputs(tmp_path, weights="[0.75, 0.25]"):
    snapshots = _write(tmp_path / "s.csv", "1,1\n1,-1\n")
    weights = _write(tmp_path / "w.json", f'{{"weights": {weights}}}')
    return snapshots, weights


def test_pod(tmp_path):
    snapshots, weights = _pod_inputs(tmp_path)
    out = tmp_path / "out"
    code = cli.main(["pod", "--snapshots", snapshots, "--weights", weights, "--rank", "1", "--out", str(out)])
    assert code == cli.EXIT_OK

    report = files.read_report_json(out / "pod.json")
    assert list(report)[0] == "version"
    assert report["version"] == __version__
    assert report["lambda"] == pytest.approx([1.5, 0.5], abs=1e-12)
    assert report["discarded_energy"] == pytest.approx(0.5, abs=1e-12)
    assert report["rank"] == 1
    assert report["config"]["flags"]["rank"] == 1
    assert set(report["tolerances"]) == {"rank_tol", "zero_trace"}

    modes = files.load_matrix_csv(out / "modes.csv")
    assert modes.shape == (2, 1)
    assert np.allclose(modes[:, 0], np.array([1, 1]) / np.sqrt(2))
    assert (out / "energy.csv").read_text().startswith("mode,lambda,cumulative_energy,residual_energy\n")


def test_pod_by_energy(tmp_path):
    snapshots, weights = _pod_inputs(tmp_path)
    code = cli.main(["pod", "--snapshots", snapshots, "--weights", weights, "--energy", "0.3", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    assert files.read_report_json(tmp_path / "pod.json")["rank"] == 1


def test_pod_uniform_weights_with_labels(tmp_path):
    snapshots = _write(tmp_path / "s.csv", "a,b\n1,0\n0,1\n")
    code = cli.main(["pod", "--snapshots", snapshots, "--uniform-weights", "--labels", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    assert files.read_report_json(tmp_path / "pod.json")["lambda"] == pytest.approx([0.5, 0.5])


def test_pod_rejects_zero_weight(tmp_path, capsys):
    snapshots, weights = _pod_inputs(tmp_path, weights="[1.0, 0.0]")
    code = cli.main(["pod", "--snapshots", snapshots, "--weights", weights, "--out", str(tmp_path)])
    assert code == cli.EXIT_INPUT
    assert "faithfulness" in capsys.readouterr().err
    assert not (tmp_path / "pod.json").exists()


def test_pod_rank_out_of_range(tmp_path):
    snapshots, weights = _pod_inputs(tmp_path)
    code = cli.main(["pod", "--snapshots", snapshots, "--weights", weights, "--rank", "5", "--out", str(tmp_path)])
    assert code == cli.EXIT_INPUT


def test_malformed_csv(tmp_path, capsys):
    snapshots = _write(tmp_path / "s.csv", "1,1\n1,-1\n2,oops\n")
    _, weights = _pod_inputs(tmp_path)
    code = cli.main(["pod", "--snapshots", snapshots, "--weights", weights, "--out", str(tmp_path)])
    assert code == cli.EXIT_INPUT
    assert "row 3, col 2" in capsys.readouterr().err


def test_missing_input_file(tmp_path):
    code = cli.main(["pod", "--snapshots", str(tmp_path / "nope.csv"), "--uniform-weights", "--out", str(tmp_path)])
    assert code == cli.EXIT_INPUT


def test_bad_arguments_exit_with_2():
    with pytest.raises(SystemExit) as e:
        cli.main(["pod", "--rank", "1"])
    assert e.value.code == 2


def test_mercer(tmp_path):
    snapshots = _write(tmp_path / "s.csv", "p,q\n1,1\n1,-1\n")
    _, weights = _pod_inputs(tmp_path)
    code = cli.main(["mercer", "--snapshots", snapshots, "--weights", weights, "--labels", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK

    report = files.read_report_json(tmp_path / "mercer.json")
    assert report["eigenvalues"] == pytest.approx([1.5, 0.5])
    assert report["max_eigenvalue_gap"] <= 1e-9
    assert "kernel_checked" not in report

    gram, labels = files.load_matrix_csv(tmp_path / "gram.csv", labels=True)
    assert labels == ["p", "q"]
    assert np.allclose(gram, [[2, 0], [0, 2]])


def _pauli_inputs(tmp_path):
    alg = _write(tmp_path / "alg.json", json.dumps({"model": "matrix", "rho": [[0.9, 0], [0, 0.1]]}))
    x = _write(tmp_path / "x.csv", "0,1\n1,0\n")
    y = _write(tmp_path / "y.csv", "0,0-1i\n0+1i,0\n")
    return alg, x, y


def test_algebra(tmp_path):
    alg, x, y = _pauli_inputs(tmp_path)
    code = cli.main(["algebra", "--algebra", alg, "--element", x, "--other", y, "--out", str(tmp_path)])
    assert code == cli.EXIT_OK

    report = files.read_report_json(tmp_path / "algebra.json")
    assert report["self_adjoint"] is True
    assert report["positive"] is False
    assert report["spectrum"] == pytest.approx([-1, 1])
    assert report["norms"]["inf"] == pytest.approx(1)
    assert report["pair"]["uncertainty_gap"] == pytest.approx(0.36, abs=1e-12)
    assert report["pair"]["degree"] == 2
    assert {"tol", "cluster_tol", "reorth_tol"} <= set(report["tolerances"])


def test_algebra_applies_a_function(tmp_path):
    alg = _write(tmp_path / "alg.yaml", "model: function\nweights: [0.5, 0.5]\n")
    a = _write(tmp_path / "a.csv", "4,9\n")
    code = cli.main(["algebra", "--algebra", alg, "--element", a, "--fn", '{"fn": "sqrt"}', "--out", str(tmp_path)])
    assert code == cli.EXIT_OK

    assert files.load_matrix_csv(tmp_path / "fn.csv").tolist() == [[2.0, 3.0]]
    report = files.read_report_json(tmp_path / "algebra.json")
    assert report["fn"] == {"fn": "sqrt"}
    assert report["law"] == {"atoms": [{"x": 4.0, "w": 0.5}, {"x": 9.0, "w": 0.5}]}


def test_algebra_numerical_failure(tmp_path):
    alg = _write(tmp_path / "alg.json", json.dumps({"model": "matrix", "rho": [[1, 0], [0, 0]]}))
    x = _write(tmp_path / "x.csv", "0,1\n1,0\n")
    assert cli.main(["algebra", "--algebra", alg, "--element", x, "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL


def test_algebra_schema_violation(tmp_path):
    alg = _write(tmp_path / "alg.json", json.dumps({"model": "function"}))
    x = _write(tmp_path / "x.csv", "1,2\n")
    assert cli.main(["algebra", "--algebra", alg, "--element", x, "--out", str(tmp_path)]) == cli.EXIT_INPUT


def _synth_inputs(tmp_path):
    model = _write(tmp_path / "m.json", json.dumps({"omega0": 3.141592653589793, "domega": 1.0, "S": [2.0], "seed": 5}))
    times = _write(tmp_path / "t.csv", "0,0.5,1,1.5,2\n")
    return model, times


def test_synth_is_byte_identical(tmp_path):
    model, times = _synth_inputs(tmp_path)
    out = tmp_path / "out"
    argv = ["synth", "--model", model, "--paths", "100", "--times", times, "--lags", "0,0.5", "--out", str(out)]

    assert cli.main(argv) == cli.EXIT_OK
    first = (out / "paths.csv").read_bytes(), (out / "synth.json").read_bytes()

    assert cli.main(argv) == cli.EXIT_OK
    assert ((out / "paths.csv").read_bytes(), (out / "synth.json").read_bytes()) == first

    report = json.loads(first[1])
    assert report["seed"] == 5
    assert [row["lag"] for row in report["autocovariance"]] == [0.0, 0.5]


def test_synth_seed_override(tmp_path):
    model, times = _synth_inputs(tmp_path)
    code = cli.main(["synth", "--model", model, "--paths", "10", "--times", times, "--seed", "9", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    assert files.read_report_json(tmp_path / "synth.json")["seed"] == 9


def test_synth_rejects_bad_seed(tmp_path):
    model, times = _synth_inputs(tmp_path)
    argv = ["synth", "--model", model, "--paths", "10", "--times", times, "--seed", "-1", "--out", str(tmp_path)]
    assert cli.main(argv) == cli.EXIT_INPUT


def test_galerkin(tmp_path):
    problem = _write(
        tmp_path / "p.json",
        json.dumps({"weights": [0.5, 0.5], "kappa": [1, 2], "u0": 1, "T": 1, "steps": 1000}),
    )
    code = cli.main(["galerkin", "--problem", problem, "--out", str(tmp_path)])
    assert code == cli.EXIT_OK

    report = files.read_report_json(tmp_path / "galerkin.json")
    assert report["K"] == pytest.approx([[1.5, -0.5], [-0.5, 1.5]])
    assert report["errors"]["max_error"] <= 1e-6
    assert report["errors"]["galerkin_residual"] <= 1e-6
    assert (tmp_path / "trajectory.csv").read_text().startswith("t,u0,u1\n")


def test_galerkin_keep_flag(tmp_path):
    problem = _write(
        tmp_path / "p.json",
        json.dumps({"weights": [0.5, 0.5], "kappa": [1, 2], "u0": 1, "f_const": [0, 1], "T": 1, "steps": 100}),
    )
    code = cli.main(["galerkin", "--problem", problem, "--keep", "1", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    assert files.read_report_json(tmp_path / "galerkin.json")["kept"] == 1


def test_galerkin_unstable_kappa(tmp_path):
    problem = _write(
        tmp_path / "p.json",
        json.dumps({"weights": [0.5, 0.5], "kappa": [1, -2], "u0": 1, "T": 1, "steps": 10}),
    )
    assert cli.main(["galerkin", "--problem", problem, "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL


def test_run_config_validation(tmp_path):
    snapshots, _ = _pod_inputs(tmp_path)

    with pytest.raises(cli.InputError):
        cli.RunConfig("pod", {"snapshots": snapshots}).validate()

    with pytest.raises(cli.InputError):
        cli.RunConfig("nonsense", {}).validate()  # type: ignore

    config = cli.RunConfig("pod", {"snapshots": snapshots}, flags={"uniform_weights": True})
    config.validate()
    assert config.tolerance("rank_tol", 1e-12) == 1e-12
    assert config.echo()["tolerances"] == {"rank_tol": 1e-12}
