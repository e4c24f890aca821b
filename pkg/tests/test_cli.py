import json

import numpy as np
import pytest

from koopmuq.cli import main
from koopmuq.ingest import TimeSeries, write_csv


def read(path):
    return json.loads(path.read_text())


@pytest.fixture
def linear_csv(tmp_path):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4))
    A *= 0.9 / np.max(np.abs(np.linalg.eigvals(A)))
    xs = [rng.standard_normal(4)]
    for _ in range(49):
        xs.append(A @ xs[-1])
    path = tmp_path / "linear.csv"
    write_csv(TimeSeries(0.1, ["a", "b", "c", "d"], np.array(xs)), path)
    return path, A


@pytest.fixture
def noisy_csv(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "noisy.csv"
    write_csv(TimeSeries(0.1, ["a", "b", "c", "d"], rng.standard_normal((11, 4))), path)
    return path


def test_gen_data_default(tmp_path):
    out = tmp_path / "g"
    assert main(["gen-data", "-o", str(out)]) == 0
    lines = (out / "data.csv").read_text().splitlines()
    assert lines[0] == "time,delta,dw,sin_delta,cos_delta"
    assert len(lines) == 1 + 2001
    echo = read(out / "gen-config.json")
    assert echo["rows"] == 2001 and echo["version"]


def test_gen_data_reproducible(tmp_path):
    args = ["gen-data", "--gen-noise", "1e-4,1e-4,1e-5,1e-5", "--seed", "4", "--duration", "2"]
    assert main(args + ["-o", str(tmp_path / "a")]) == 0
    assert main(args + ["-o", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a/data.csv").read_bytes() == (tmp_path / "b/data.csv").read_bytes()


def test_gen_data_bad_step(tmp_path, capsys):
    assert main(["gen-data", "-o", str(tmp_path / "g"), "--h", "0"]) == 2
    assert "h must be positive" in capsys.readouterr().err
    assert not (tmp_path / "g").exists()


def test_estimate_identity_equals_dmd(linear_csv, tmp_path):
    path, _ = linear_csv
    assert main(["estimate", "-i", str(path), "-o", str(tmp_path / "d")]) == 0
    assert main(["estimate", "-i", str(path), "-o", str(tmp_path / "e"),
                 "--method", "EDMD", "--dictionary", "identity"]) == 0
    kd = read(tmp_path / "d/estimate.json")["estimate"]["K"]
    ke = read(tmp_path / "e/estimate.json")["estimate"]["K"]
    assert kd == ke


def test_estimate_noiseless_residual(linear_csv, tmp_path):
    path, A = linear_csv
    assert main(["estimate", "-i", str(path), "-o", str(tmp_path / "d")]) == 0
    out = read(tmp_path / "d/estimate.json")
    assert out["residual_norm"] <= 1e-9
    K = np.array(out["estimate"]["K"]).reshape(4, 4)
    assert np.max(np.abs(K - A.T)) <= 1e-8


def test_estimate_missing_input(tmp_path, capsys):
    assert main(["estimate", "-i", str(tmp_path / "none.csv"), "-o", str(tmp_path / "o")]) == 2
    assert "none.csv" in capsys.readouterr().err


def test_muq_diagonal(noisy_csv, tmp_path):
    assert main(["muq", "-i", str(noisy_csv), "-o", str(tmp_path / "m"),
                 "--noise-manufacturer", "0.1,0.2,0.3,0.4"]) == 0
    vm = read(tmp_path / "m/muq.json")["variance_matrix"]
    S = np.array(vm["S"]).reshape(4, 4)
    np.testing.assert_allclose(np.diag(S), 0.2)
    assert (vm["m"], vm["p"]) == (10, 4)
    assert (tmp_path / "m/elements.csv").read_text().startswith("i,j,mean,variance\n")


def test_muq_edmd_feature_dim(tmp_path):
    rng = np.random.default_rng(2)
    path = tmp_path / "d.csv"
    write_csv(TimeSeries(0.1, ["a", "b", "c"], rng.standard_normal((40, 3))), path)
    assert main(["muq", "-i", str(path), "-o", str(tmp_path / "m"), "--method", "EDMD",
                 "--dictionary", "quadratic", "--noise-manufacturer", "1,2,3"]) == 0
    out = read(tmp_path / "m/muq.json")
    assert out["variance_matrix"]["p"] == 6
    assert out["lifted_noise"]["variances"] == [1.0, 2.0, 3.0, 3.0, 12.0, 27.0]


@pytest.mark.parametrize("command", ["muq", "mc-validate", "spectral"])
def test_dof_guard_exit_code(noisy_csv, tmp_path, command):
    out = tmp_path / "x"
    code = main([command, "-i", str(noisy_csv), "-o", str(out), "--method", "EDMD",
                 "--dictionary", "quadratic", "--noise-manufacturer", "1,1,1,1"])
    assert code == 3
    assert not out.exists()


def test_mc_zero_noise(linear_csv, tmp_path):
    path, _ = linear_csv
    out = tmp_path / "mc"
    assert main(["mc-validate", "-i", str(path), "-o", str(out), "-N", "2",
                 "--noise-manufacturer", "1,1,1,1", "--noise-scale", "0", "--seed", "11"]) == 0
    rep = read(out / "report.json")
    assert rep["report"]["R_hat"] == [0.0] * 16
    assert rep["seed"] == 11 and rep["mc_config"]["seed"] == 11


def test_mc_benchmark(tmp_path):
    out = tmp_path / "b"
    assert main(["mc-validate", "--benchmark", "-o", str(out), "--seed", "3"]) == 0
    rep = read(out / "report.json")
    assert 0.85 <= rep["report"]["median_ratio"] <= 1.15
    hist = (out / "histograms.csv").read_text().splitlines()
    assert hist[0] == "i,j,bin_left,bin_right,count" and len(hist) == 1 + 16 * 50
    assert (out / "mp_density.csv").exists() and (out / "mc_spectrum.csv").exists()


def test_spectral_direct_params(tmp_path):
    out = tmp_path / "s"
    assert main(["spectral", "-o", str(out), "--ratio", "1", "--sigma2", "1"]) == 0
    sp = read(out / "spectral.json")
    assert sp["mp"]["lambda_plus"] == 4.0
    assert abs(sp["moments"][0] - 1.0) <= 1e-6
    assert sp["haar"]["max_orthogonality_error"] <= 1e-10
    assert 0.0 <= sp["haar"]["decorrelation_statistic"] <= 1.0


def test_spectral_with_mc_report(tmp_path):
    assert main(["mc-validate", "--benchmark", "-o", str(tmp_path / "b"), "-N", "200"]) == 0
    assert main(["spectral", "-o", str(tmp_path / "s"), "--ratio", "0.02", "--sigma2", "0.1",
                 "--mc-report", str(tmp_path / "b/report.json")]) == 0
    sp = read(tmp_path / "s/spectral.json")
    assert len(sp["moment_deltas"]) == 4
    np.testing.assert_allclose(np.array(sp["moments"]) - np.array(sp["moments_mc"]), sp["moment_deltas"])


def test_config_file_and_flag_override(linear_csv, tmp_path):
    path, _ = linear_csv
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"input": str(path), "method": "EDMD", "dictionary": "quadratic",
                               "noise": {"source": "manufacturer", "variances": [1, 1, 1, 1]}}))
    assert main(["muq", "--config", str(cfg), "-o", str(tmp_path / "m")]) == 0
    assert read(tmp_path / "m/muq.json")["variance_matrix"]["p"] == 8
    assert main(["muq", "--config", str(cfg), "--method", "DMD", "-o", str(tmp_path / "n")]) == 0
    assert read(tmp_path / "n/muq.json")["variance_matrix"]["p"] == 4


def test_seed_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("KOOPMUQ_SEED", "99")
    assert main(["mc-validate", "--benchmark", "-N", "10", "-o", str(tmp_path / "e")]) == 0
    assert read(tmp_path / "e/report.json")["seed"] == 99
    assert main(["mc-validate", "--benchmark", "-N", "10", "--seed", "5", "-o", str(tmp_path / "f")]) == 0
    assert read(tmp_path / "f/report.json")["seed"] == 5


def test_bad_config_json(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert main(["estimate", "--config", str(cfg)]) == 2


def test_usage_error():
    assert main(["nonsense"]) == 2
