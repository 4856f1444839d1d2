import math

import numpy as np
import pytest
import yaml

from gridless_doa.experiments import (
    ConfigError,
    bundled_configs,
    load_config,
    make_trial_data,
    override,
    parse_config,
    run_crlb,
    run_montecarlo,
    run_spectrum,
    run_trial,
)
from gridless_doa.io import read_csv

SMALL = {
    "name": "small",
    "geometry": {"M": 6},
    "scene": {"thetas": [0.2, 0.55], "powers": [1.0, 1.0]},
    "N": 40,
    "sweep": {"snr_db": [0, 20]},
    "n_trials": 3,
    "base_seed": 11,
    "methods": [
        {"label": "SPA+", "method": "spa"},
        {"label": "SPA", "method": "spa", "mode": "distinct"},
        {"label": "SPICE+", "method": "spice", "grid": 100},
        {"label": "SPICE+-PP", "method": "spice_pp", "grid": 100},
        {"label": "MUSIC", "method": "music", "grid": 100},
        {"label": "IAA", "method": "iaa", "grid": 100},
    ],
}


def _with(**changes):
    raw = {**SMALL, **changes}
    return {k: v for k, v in raw.items() if v is not None}


def test_bundled_configs_parse():
    names = bundled_configs()
    for stem in ("exp1_snr_sweep", "exp2_array_length", "exp3_sla_efficiency", "exp4_spa_snr",
                 "exp5_spa_snapshots", "spectra_uncorrelated", "spectra_coherent"):
        assert stem in names
        cfg = load_config(names[stem])
        assert cfg.n_trials >= 1 and cfg.methods


def test_config_points_and_defaults():
    cfg = parse_config(SMALL)
    assert [p["snr_db"] for p in cfg.points()] == [0.0, 20.0]
    assert all(p["N"] == 40 for p in cfg.points())
    assert cfg.methods[0].mode == "equal" and cfg.methods[2].grid == 100
    cfg = parse_config(_with(sweep={"N": [10, "inf"]}, N=None, snr_db=5))
    assert cfg.points()[1]["N"] == math.inf
    cfg = parse_config(_with(sweep={"M": [4, 8]}, snr_db=5))
    assert cfg.geometry_at(cfg.points()[1]).M == 8


@pytest.mark.parametrize("changes, field", [
    (dict(geometry=None), "geometry"),
    (dict(sweep={"snr_db": [1], "N": [2]}), "sweep"),
    (dict(sweep={"K": [1]}), "sweep"),
    (dict(sweep={"snr_db": []}), "sweep.snr_db"),
    (dict(sweep={"N": [0]}), "sweep.N"),
    (dict(sweep=None), "snr_db"),
    (dict(N=None), "N"),
    (dict(snr_db=3), "snr_db"),
    (dict(n_trials=0), "n_trials"),
    (dict(methods=[{"method": "omp"}]), "methods[0].method"),
    (dict(methods=[{"method": "spa", "mode": "weird"}]), "methods[0].mode"),
    (dict(methods=[{"method": "spa", "tol": 1}]), "methods[0]"),
    (dict(methods=[{"method": "spa"}, {"method": "spa"}]), "labels"),
    (dict(scene={"thetas": [0.1]}), "scene"),
    (dict(scene={"thetas": [1.5], "powers": [1]}), "scene"),
    (dict(colour="blue"), "colour"),
    (dict(geometry={"omega": [1, 2, 5]}, sweep={"M": [4]}, snr_db=0), "sweep.M"),
])
def test_config_errors_name_the_field(changes, field):
    with pytest.raises(ConfigError) as info:
        parse_config(_with(**changes))
    assert field in str(info.value)


def test_load_config_reports_yaml_errors(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("name: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_trial_data_seeds_and_exact_mode():
    cfg = parse_config(SMALL)
    a = make_trial_data(cfg, cfg.points()[0], 5)
    b = make_trial_data(cfg, cfg.points()[0], 5)
    assert a.Y.tobytes() == b.Y.tobytes()
    exact = make_trial_data(override(cfg, N=math.inf, sweep_axis=None), {"snr_db": 0.0, "N": math.inf, "M": 6}, 0)
    assert exact.exact and exact.Y is None


def test_run_trial_records_all_methods():
    cfg = parse_config(SMALL)
    results = run_trial(cfg, cfg.points()[1], 0)
    assert [r.method for r in results] == [m.label for m in cfg.methods]
    for r in results:
        assert r.seed == 11 and r.mse >= 0 and r.runtime_s >= 0
    spa = results[0]
    assert spa.mse < 1e-4


def test_run_trial_records_failures_without_aborting(monkeypatch):
    import gridless_doa.experiments as ex

    def boom(*args, **kwargs):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(ex, "spa_estimate", boom)
    cfg = parse_config(SMALL)
    results = run_trial(cfg, cfg.points()[0], 0)
    failed = [r for r in results if r.method in ("SPA+", "SPA")]
    assert all(not r.converged and r.note.startswith("error") for r in failed)
    assert all(r.mse == pytest.approx(0.25) for r in failed)
    assert len(results) == len(cfg.methods)


def test_montecarlo_outputs_and_determinism(tmp_path):
    cfg = parse_config(SMALL)
    a = run_montecarlo(cfg, tmp_path / "a")
    b = run_montecarlo(cfg, tmp_path / "b", threads=3)
    assert a["aggregate"].read_bytes() == b["aggregate"].read_bytes()
    trials_a = [{k: v for k, v in r.items() if k != "runtime_s"} for r in read_csv(a["trials"])]
    trials_b = [{k: v for k, v in r.items() if k != "runtime_s"} for r in read_csv(b["trials"])]
    assert trials_a == trials_b
    rows = read_csv(a["aggregate"])
    assert len(rows) == 2 * len(cfg.methods)
    assert list(rows[0]) == ["method", "snr_db", "N", "n_trials", "n_failed", "n_unconverged",
                             "mean_mse", "crlb_equal", "crlb_distinct", "crlb_over_mse"]
    assert [r["n_trials"] for r in rows] == ["3"] * len(rows)
    assert float(rows[-1]["crlb_equal"]) < float(rows[0]["crlb_equal"])
    seeds = [r["seed"] for r in read_csv(a["trials"]) if r["method"] == "SPA+"]
    assert seeds == ["11", "12", "13"] * 2
    assert list(read_csv(a["runtime"])[0]) == ["method", "snr_db", "N", "n_trials", "mean_runtime_s"]


def test_montecarlo_m_sweep_adds_column(tmp_path):
    cfg = parse_config(_with(sweep={"M": [4, 5]}, snr_db=10, n_trials=1,
                             methods=[{"method": "spa"}]))
    files = run_montecarlo(cfg, tmp_path)
    rows = read_csv(files["aggregate"])
    assert [r["M"] for r in rows] == ["4", "5"]
    assert "M" in read_csv(files["trials"])[0]


def test_spectrum_single_snapshot_skips_music(tmp_path):
    cfg = parse_config(_with(N=1, sweep=None, snr_db=20))
    files = run_spectrum(cfg, tmp_path)
    assert "MUSIC" not in files and "SPA+" in files
    assert "MUSIC: skipped" in (tmp_path / "notes.txt").read_text()
    spa_rows = read_csv(files["SPA+"])
    assert len(spa_rows) <= 5
    assert len(read_csv(files["IAA"])) == 100


def test_spectrum_exact_covariance(tmp_path):
    cfg = parse_config(_with(N="inf", sweep=None, snr_db=-20))
    files = run_spectrum(cfg, tmp_path)
    assert "IAA" not in files
    thetas = sorted(float(r["theta"]) for r in read_csv(files["SPA+"]))
    powers = {round(float(r["theta"]), 6): float(r["power"]) for r in read_csv(files["SPA+"])}
    big = [t for t in thetas if powers[round(t, 6)] > 1e-3]
    np.testing.assert_allclose(big, [0.2, 0.55], atol=1e-6)


def test_spectrum_requires_single_point(tmp_path):
    with pytest.raises(ConfigError):
        run_spectrum(parse_config(SMALL), tmp_path)


def test_crlb_table(tmp_path):
    path = run_crlb(parse_config(SMALL), tmp_path)
    rows = read_csv(path)
    assert len(rows) == 2
    assert all(float(r["equal_over_distinct"]) <= 1.0 for r in rows)


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    assert load_config(path).methods == parse_config(SMALL).methods
