"""Experiment configs and the Monte-Carlo / spectrum drivers behind the CLI.

A config is a YAML mapping::

    name: exp1
    geometry: {M: 10}             # or {omega: [1, 2, 5, 7]}
    scene: {thetas: [...], powers: [...], coherence: []}
    source_model: gaussian        # or constant-modulus
    snr_db: 25                    # fixed values ...
    N: 200                        # ... ("inf" uses the exact covariance)
    sweep: {snr_db: [-20, -10, 0]}  # exactly one axis: snr_db, N or M
    n_trials: 50
    base_seed: 0
    output: out/exp1
    methods:
      - {label: SPA+, method: spa, mode: equal}
      - {label: SPICE3+, method: spice, mode: equal, grid: 1000}

Trial ``t`` uses seed ``base_seed + t`` at every sweep point, so sweep points
share their random draws.
"""

from __future__ import annotations

import copy
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .array_model import ArrayGeometry
from .baselines import Grid, iaa, music, peak_pick, spice, spice_pp
from .io import write_csv, write_spectrum, write_trials
from .metrics import TrialResult, crlb_stochastic, mse_frequency, top_k
from .signal_sim import NoiseSpec, SourceScene, generate_snapshots, sample_covariance, snr_to_sigma, true_covariance
from .spa import spa_estimate, spa_estimate_covariance

logger = logging.getLogger(__name__)

METHODS = ("spa", "spice", "spice_pp", "music", "iaa")
SWEEP_AXES = ("snr_db", "N", "M")
_METHOD_KEYS = {"label", "method", "mode", "grid", "K", "max_iter"}
_TOP_KEYS = {"name", "geometry", "scene", "source_model", "snr_db", "N", "sweep", "n_trials",
             "base_seed", "output", "methods", "description"}


class ConfigError(ValueError):
    """Invalid experiment config; the message names the offending field."""


@dataclass
class MethodSpec:
    label: str
    method: str
    mode: str = "equal"
    grid: int = 500
    K: int | None = None
    max_iter: int = 500


@dataclass
class ExperimentConfig:
    name: str
    geometry: ArrayGeometry
    scene: SourceScene
    methods: list[MethodSpec]
    snr_db: float | None = None
    N: float | None = None
    sweep_axis: str | None = None
    sweep_values: list = field(default_factory=list)
    n_trials: int = 50
    base_seed: int = 0
    output: str | None = None

    def points(self) -> list[dict]:
        """Every (snr_db, N, M) setting, in sweep order."""
        base = {"snr_db": self.snr_db, "N": self.N, "M": self.geometry.M}
        if self.sweep_axis is None:
            return [base]
        return [{**base, self.sweep_axis: v} for v in self.sweep_values]

    def geometry_at(self, point: dict) -> ArrayGeometry:
        if self.sweep_axis == "M":
            return ArrayGeometry.ula(int(point["M"]))
        return self.geometry


def _parse_N(value, where: str) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        N = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a snapshot count or 'inf', got {value!r}") from None
    if N != math.inf and (N < 1 or N != int(N)):
        raise ConfigError(f"{where}: snapshot count must be a positive integer, got {value!r}")
    return N


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a config mapping; errors name the offending field."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    for key in ("geometry", "scene", "methods"):
        if key not in raw:
            raise ConfigError(f"missing required field '{key}'")
    try:
        geom = ArrayGeometry.from_dict(raw["geometry"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"geometry: {exc}") from None
    sc = raw["scene"]
    if not isinstance(sc, dict) or "thetas" not in sc or "powers" not in sc:
        raise ConfigError("scene: needs 'thetas' and 'powers'")
    try:
        scene = SourceScene(
            sc["thetas"], sc["powers"],
            tuple(tuple(c) for c in sc.get("coherence", ()) or ()),
            raw.get("source_model", sc.get("source_model", "gaussian")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scene: {exc}") from None

    sweep = raw.get("sweep") or {}
    if not isinstance(sweep, dict) or len(sweep) > 1:
        raise ConfigError("sweep: must map exactly one axis to a list of values")
    axis, values = (next(iter(sweep.items())) if sweep else (None, []))
    if axis is not None:
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep: unknown axis {axis!r} (choose from {', '.join(SWEEP_AXES)})")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{axis}: expected a nonempty list")
        if axis == "N":
            values = [_parse_N(v, f"sweep.N[{i}]") for i, v in enumerate(values)]
        elif axis == "M":
            if not geom.is_ula:
                raise ConfigError("sweep.M: only ULAs can be swept in length")
            if any(int(v) != v or v < 2 for v in values):
                raise ConfigError("sweep.M: array lengths must be integers >= 2")
            values = [int(v) for v in values]
        else:
            values = [float(v) for v in values]
        if axis in raw:
            raise ConfigError(f"{axis}: fixed value conflicts with the sweep axis")

    snr = raw.get("snr_db")
    if axis != "snr_db":
        if snr is None:
            raise ConfigError("snr_db: required unless it is the sweep axis")
        snr = float(snr)
    N = raw.get("N")
    if axis != "N":
        if N is None:
            raise ConfigError("N: required unless it is the sweep axis")
        N = _parse_N(N, "N")

    methods = []
    if not isinstance(raw["methods"], list) or not raw["methods"]:
        raise ConfigError("methods: expected a nonempty list")
    for i, m in enumerate(raw["methods"]):
        where = f"methods[{i}]"
        if not isinstance(m, dict) or "method" not in m:
            raise ConfigError(f"{where}: needs a 'method' field")
        bad = set(m) - _METHOD_KEYS
        if bad:
            raise ConfigError(f"{where}: unknown field(s) {', '.join(sorted(bad))}")
        if m["method"] not in METHODS:
            raise ConfigError(f"{where}.method: unknown method {m['method']!r}")
        mode = m.get("mode", "equal")
        if mode not in ("equal", "distinct"):
            raise ConfigError(f"{where}.mode: must be 'equal' or 'distinct'")
        spec = MethodSpec(
            label=str(m.get("label", m["method"])), method=m["method"], mode=mode,
            grid=int(m.get("grid", 500)), K=m.get("K"), max_iter=int(m.get("max_iter", 500)),
        )
        if spec.grid < 2:
            raise ConfigError(f"{where}.grid: must be >= 2")
        methods.append(spec)
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise ConfigError("methods: labels must be unique")

    n_trials = int(raw.get("n_trials", 50))
    if n_trials < 1:
        raise ConfigError("n_trials: must be >= 1")
    base_seed = int(raw.get("base_seed", 0))
    if base_seed < 0:
        raise ConfigError("base_seed: must be nonnegative")
    return ExperimentConfig(
        name=str(raw.get("name", "experiment")), geometry=geom, scene=scene, methods=methods,
        snr_db=snr, N=N, sweep_axis=axis, sweep_values=values, n_trials=n_trials,
        base_seed=base_seed, output=raw.get("output"),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw)


def bundled_configs() -> dict[str, Path]:
    """Example configs shipped with the package, by file stem."""
    root = Path(__file__).parent / "configs"
    return {p.stem: p for p in sorted(root.glob("*.yaml"))}


# ---------------------------------------------------------------- one trial


@dataclass
class TrialData:
    """Snapshots (or the exact covariance) for one trial at one sweep point."""

    geometry: ArrayGeometry
    scene: SourceScene
    sigma: float
    N: float
    Y: np.ndarray | None
    R: np.ndarray

    @property
    def exact(self) -> bool:
        return self.Y is None


def make_trial_data(cfg: ExperimentConfig, point: dict, seed: int) -> TrialData:
    geom = cfg.geometry_at(point)
    sigma = snr_to_sigma(min(cfg.scene.powers), point["snr_db"])
    N = point["N"]
    if math.isinf(N):
        return TrialData(geom, cfg.scene, sigma, N, None, true_covariance(cfg.scene, geom, NoiseSpec(sigma)))
    Y = generate_snapshots(cfg.scene, geom, NoiseSpec(sigma), int(N), seed)
    return TrialData(geom, cfg.scene, sigma, N, Y, sample_covariance(Y))


class _SpiceCache(dict):
    """Shares one SPICE run between SPICE and SPICE-PP within a trial."""

    def get_result(self, data: TrialData, spec: MethodSpec):
        key = (spec.grid, spec.mode, spec.max_iter)
        if key not in self:
            t0 = time.perf_counter()
            N = None if data.exact else data.N
            res = spice(data.R, data.geometry, N, Grid(spec.grid), spec.mode, max_iter=spec.max_iter)
            self[key] = (res, time.perf_counter() - t0)
        return self[key]


def run_method(spec: MethodSpec, data: TrialData, cache: _SpiceCache | None = None):
    """Run one method and return ``(thetas_K, spectrum_or_estimate, converged, note, seconds)``.

    The second element is an ``(thetas, values)`` pair suitable for a
    spectrum CSV.
    """
    cache = cache if cache is not None else _SpiceCache()
    K = spec.K or data.scene.K
    t0 = time.perf_counter()
    note = ""
    converged = True
    if spec.method == "spa":
        if data.exact:
            est = spa_estimate_covariance(data.R, data.geometry, None, spec.mode)
        else:
            est = spa_estimate(data.Y, data.geometry, spec.mode)
        thetas, short = top_k(est, K)
        curve = (est.thetas, est.powers)
        elapsed = time.perf_counter() - t0
    elif spec.method in ("spice", "spice_pp"):
        res, spice_time = cache.get_result(data, spec)
        converged = res.converged
        t1 = time.perf_counter()
        if spec.method == "spice":
            thetas, short = peak_pick(res.spectrum, K)
            curve = (res.grid.points, res.powers)
            elapsed = spice_time + (time.perf_counter() - t1)
        else:
            est = spice_pp(res)
            thetas, short = top_k(est, K)
            curve = (est.thetas, est.powers)
            elapsed = spice_time + (time.perf_counter() - t1)
    elif spec.method == "music":
        if not data.exact and data.N < 2:
            raise _Skip("MUSIC needs more than one snapshot")
        spec_ = music(data.R, K, data.geometry, Grid(spec.grid))
        thetas, short = peak_pick(spec_, K)
        curve = (spec_.thetas, spec_.values)
        elapsed = time.perf_counter() - t0
    elif spec.method == "iaa":
        if data.exact:
            raise _Skip("IAA works on snapshots, not on an exact covariance")
        spec_ = iaa(data.Y, data.geometry, Grid(spec.grid), max_iter=spec.max_iter)
        converged = spec_.diagnostics["converged"]
        thetas, short = peak_pick(spec_, K)
        curve = (spec_.thetas, spec_.values)
        elapsed = time.perf_counter() - t0
    else:  # pragma: no cover - parse_config rejects it
        raise ConfigError(f"unknown method {spec.method!r}")
    if short:
        note = f"fewer than {K} components"
    return thetas, curve, converged, note, elapsed


class _Skip(Exception):
    pass


def run_trial(cfg: ExperimentConfig, point: dict, trial: int) -> list[TrialResult]:
    seed = cfg.base_seed + trial
    data = make_trial_data(cfg, point, seed)
    cache = _SpiceCache()
    out = []
    for spec in cfg.methods:
        extra = {"M": point["M"]} if cfg.sweep_axis == "M" else {}
        try:
            thetas, _, converged, note, elapsed = run_method(spec, data, cache)
        except _Skip as exc:
            logger.info("%s skipped: %s", spec.label, exc)
            continue
        except Exception as exc:  # recorded, never aborts the sweep
            logger.warning("%s failed on seed %d: %s", spec.label, seed, exc)
            out.append(TrialResult(spec.label, seed, point["snr_db"], point["N"],
                                   mse_frequency([], cfg.scene.thetas), 0.0, False,
                                   note=f"error: {exc}", extra=extra))
            continue
        mse = mse_frequency(thetas, cfg.scene.thetas)
        out.append(TrialResult(spec.label, seed, point["snr_db"], point["N"], mse, elapsed,
                               converged, thetas, note, extra))
    return out


# ---------------------------------------------------------------- drivers


def _crlb_pair(cfg: ExperimentConfig, point: dict) -> tuple[float, float]:
    N = point["N"]
    if math.isinf(N):
        return 0.0, 0.0
    geom = cfg.geometry_at(point)
    sigma = snr_to_sigma(min(cfg.scene.powers), point["snr_db"])
    try:
        eq = float(crlb_stochastic(cfg.scene, geom, sigma, N, "equal").mean())
        di = float(crlb_stochastic(cfg.scene, geom, sigma, N, "distinct").mean())
    except ValueError:
        return math.nan, math.nan
    return eq, di


def run_montecarlo(cfg: ExperimentConfig, out_dir: str | Path, threads: int = 1) -> dict[str, Path]:
    """Run every trial at every sweep point and write the result tables.

    Files written:
        ``trials.csv``: one row per method and trial.
        ``aggregate.csv``: mean MSE, CRLB and CRLB/MSE per method and sweep
        point. It holds no timings, so reruns produce identical bytes.
        ``runtime.csv``: mean runtime per method and sweep point.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(pi, point, t) for pi, point in enumerate(cfg.points()) for t in range(cfg.n_trials)]

    def work(job):
        _, point, t = job
        return run_trial(cfg, point, t)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    extra = ("M",) if cfg.sweep_axis == "M" else ()
    trials = [tr for res in results for tr in res]
    write_trials(out_dir / "trials.csv", trials, extra)

    axis_cols = ("snr_db", "N") + extra
    agg_rows, time_rows = [], []
    for pi, point in enumerate(cfg.points()):
        crlb_eq, crlb_di = _crlb_pair(cfg, point)
        point_trials = [tr for (pj, _, _), res in zip(jobs, results) if pj == pi for tr in res]
        for spec in cfg.methods:
            rows = [tr for tr in point_trials if tr.method == spec.label]
            if not rows:
                continue
            mse = float(np.mean([tr.mse for tr in rows]))
            crlb = crlb_eq if spec.mode == "equal" else crlb_di
            eff = crlb / mse if mse > 0 else math.nan
            failed = sum(tr.note.startswith("error") for tr in rows)
            unconverged = sum(not tr.converged for tr in rows)
            axis_vals = [point[c] for c in axis_cols]
            agg_rows.append([spec.label, *axis_vals, len(rows), failed, unconverged, mse,
                             crlb_eq, crlb_di, eff])
            time_rows.append([spec.label, *axis_vals, len(rows),
                              float(np.mean([tr.runtime_s for tr in rows]))])
    write_csv(out_dir / "aggregate.csv",
              ("method", *axis_cols, "n_trials", "n_failed", "n_unconverged", "mean_mse",
               "crlb_equal", "crlb_distinct", "crlb_over_mse"), agg_rows)
    write_csv(out_dir / "runtime.csv", ("method", *axis_cols, "n_trials", "mean_runtime_s"), time_rows)
    return {"trials": out_dir / "trials.csv", "aggregate": out_dir / "aggregate.csv",
            "runtime": out_dir / "runtime.csv"}


def _slug(label: str) -> str:
    keep = [c if c.isalnum() else "_" for c in label.replace("+", "plus")]
    return "".join(keep).strip("_").lower() or "method"


def run_spectrum(cfg: ExperimentConfig, out_dir: str | Path, seed: int | None = None) -> dict[str, Path]:
    """One realization at a single (N, SNR) point; one CSV per method.

    Gridless methods write their discrete ``(theta, power)`` estimates, dense
    methods their full spectra. Skipped methods are listed in ``notes.txt``.
    """
    if cfg.sweep_axis is not None and len(cfg.sweep_values) != 1:
        raise ConfigError("sweep: the spectrum command needs a single (N, SNR) point")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    point = cfg.points()[0]
    data = make_trial_data(cfg, point, cfg.base_seed if seed is None else seed)
    cache = _SpiceCache()
    files, notes = {}, []
    for spec in cfg.methods:
        try:
            _, (thetas, values), converged, note, _ = run_method(spec, data, cache)
        except _Skip as exc:
            notes.append(f"{spec.label}: skipped ({exc})")
            continue
        except Exception as exc:
            notes.append(f"{spec.label}: failed ({exc})")
            continue
        path = out_dir / f"spectrum_{_slug(spec.label)}.csv"
        write_spectrum(path, thetas, values)
        files[spec.label] = path
        if note or not converged:
            notes.append(f"{spec.label}: {note or 'did not converge'}")
    (out_dir / "notes.txt").write_text("".join(n + "\n" for n in notes))
    files["notes"] = out_dir / "notes.txt"
    return files


def run_crlb(cfg: ExperimentConfig, out_dir: str | Path) -> Path:
    """CRLB (equal- and distinct-variance) at every sweep point."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    extra = ("M",) if cfg.sweep_axis == "M" else ()
    rows = []
    for point in cfg.points():
        eq, di = _crlb_pair(cfg, point)
        rows.append([point["snr_db"], point["N"], *[point[c] for c in extra], eq, di,
                     eq / di if di > 0 else math.nan])
    path = out_dir / "crlb.csv"
    write_csv(path, ("snr_db", "N", *extra, "crlb_equal", "crlb_distinct", "equal_over_distinct"), rows)
    return path


def override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    new = copy.copy(cfg)
    for k, v in changes.items():
        if v is not None:
            setattr(new, k, v)
    return new
