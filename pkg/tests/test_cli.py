import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from gridless_doa import ArrayGeometry, NoiseSpec, SourceScene, generate_snapshots, mse_frequency
from gridless_doa.cli import main
from gridless_doa.io import read_csv, read_estimate, write_snapshots

CONFIG = {
    "name": "cli",
    "geometry": {"M": 6},
    "scene": {"thetas": [0.2, 0.55], "powers": [1.0, 1.0]},
    "N": 40,
    "sweep": {"snr_db": [10]},
    "n_trials": 2,
    "base_seed": 3,
    "methods": [
        {"label": "SPA+", "method": "spa"},
        {"label": "SPICE+", "method": "spice", "grid": 100},
        {"label": "MUSIC", "method": "music", "grid": 100},
    ],
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(CONFIG))
    return path


@pytest.fixture
def snapshot_file(tmp_path):
    g = ArrayGeometry.ula(8)
    Y = generate_snapshots(SourceScene([0.21, 0.62], [1.0, 2.0]), g, NoiseSpec(0.01), 100, seed=0)
    path = tmp_path / "y.txt"
    write_snapshots(path, Y)
    return path


def test_montecarlo_is_deterministic(config, tmp_path):
    for out in ("a", "b"):
        assert main(["montecarlo", "--config", str(config), "--out", str(tmp_path / out),
                     "--trials", "1", "--seed", "42"]) == 0
    a = (tmp_path / "a" / "aggregate.csv").read_bytes()
    assert a == (tmp_path / "b" / "aggregate.csv").read_bytes()
    seeds = {r["seed"] for r in read_csv(tmp_path / "a" / "trials.csv")}
    assert seeds == {"42"}


def test_threads_flag_and_env(config, tmp_path, monkeypatch):
    assert main(["montecarlo", "--config", str(config), "--out", str(tmp_path / "t1"), "--threads", "2"]) == 0
    monkeypatch.setenv("GRIDLESS_DOA_THREADS", "2")
    assert main(["montecarlo", "--config", str(config), "--out", str(tmp_path / "t2")]) == 0
    assert (tmp_path / "t1" / "aggregate.csv").read_bytes() == (tmp_path / "t2" / "aggregate.csv").read_bytes()
    monkeypatch.setenv("GRIDLESS_DOA_THREADS", "many")
    assert main(["montecarlo", "--config", str(config), "--out", str(tmp_path / "t3")]) == 2


def test_spectrum_and_crlb_commands(config, tmp_path, capsys):
    assert main(["spectrum", "--config", str(config), "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "spectrum_spaplus.csv").exists()
    assert (tmp_path / "s" / "spectrum_music.csv").exists()
    assert main(["crlb", "--config", str(config), "--out", str(tmp_path / "c")]) == 0
    assert read_csv(tmp_path / "c" / "crlb.csv")[0]["snr_db"] == "10"


def test_bundled_config_by_name(tmp_path):
    assert main(["crlb", "--config", "exp3_sla_efficiency", "--out", str(tmp_path)]) == 0
    ratios = [float(r["equal_over_distinct"]) for r in read_csv(tmp_path / "crlb.csv")]
    assert ratios[0] == pytest.approx(0.9281, abs=0.002)


def test_simulate_then_estimate_round_trip(config, tmp_path):
    assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "sim"),
                 "--snr-db", "30", "--N", "200"]) == 0
    truth = json.loads((tmp_path / "sim" / "truth.json").read_text())
    assert truth["N"] == 200 and truth["snr_db"] == 30
    out = tmp_path / "est.json"
    assert main(["estimate", "--input", str(tmp_path / "sim" / "snapshots.txt"), "--geometry", "6",
                 "--out", str(out)]) == 0
    est = read_estimate(out)
    assert est.r <= 5
    top = np.sort(est.thetas[np.argsort(-est.powers)[:2]])
    assert mse_frequency(top, truth["thetas"]) < 1e-5


@pytest.mark.parametrize("method", ["spa", "spice", "spice_pp", "music", "iaa"])
def test_estimate_every_method(method, snapshot_file, tmp_path):
    args = ["estimate", "--input", str(snapshot_file), "--method", method, "--out", str(tmp_path / "o"),
            "--grid", "200"]
    if method in ("spice", "music", "iaa"):
        args += ["--K", "2"]
    assert main(args) == 0
    est = read_estimate(tmp_path / "o" / "estimate.json")
    assert est.r <= 7
    assert mse_frequency(np.sort(est.thetas[np.argsort(-est.powers)[:2]]), [0.21, 0.62]) < 1e-4


def test_estimate_on_sla_geometry(tmp_path):
    g = ArrayGeometry([1, 2, 5, 7])
    Y = generate_snapshots(SourceScene([0.3], [1.0]), g, NoiseSpec(0.1), 50, seed=1)
    write_snapshots(tmp_path / "y.txt", Y)
    assert main(["estimate", "--input", str(tmp_path / "y.txt"), "--geometry", "1,2,5,7",
                 "--mode", "distinct", "--out", str(tmp_path / "e.json")]) == 0
    assert read_estimate(tmp_path / "e.json").r <= 6
    assert main(["estimate", "--input", str(tmp_path / "y.txt"), "--geometry", "5",
                 "--out", str(tmp_path / "f.json")]) == 2


def test_music_without_k_is_usage_error(snapshot_file, capsys):
    assert main(["estimate", "--input", str(snapshot_file), "--method", "music"]) == 2
    assert "--K" in capsys.readouterr().err


def test_empty_file_is_parse_error(tmp_path, capsys):
    path = tmp_path / "empty.txt"
    path.write_text("")
    assert main(["estimate", "--input", str(path)]) == 1
    assert "[parse]" in capsys.readouterr().err


def test_malformed_entry_names_line_and_field(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("2 1\n1+1j oops\n")
    assert main(["estimate", "--input", str(path)]) == 1
    assert "bad.txt:2 field 2" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    assert main(["montecarlo", "--config", "no_such_config"]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({**CONFIG, "n_trials": 0}))
    assert main(["montecarlo", "--config", str(bad)]) == 1
    assert "[config]" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["montecarlo"])
    assert info.value.code == 2


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "gridless_doa.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("spectrum", "montecarlo", "estimate", "crlb", "simulate"):
        assert cmd in out.stdout
