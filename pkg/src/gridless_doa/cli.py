"""Command-line entry point: ``gridless-doa <command> [options]``.

Commands:
    spectrum    one-realization spectra for a single (N, SNR) point
    montecarlo  Monte-Carlo sweep with per-trial and aggregate CSVs
    estimate    estimate frequencies from a snapshot file
    crlb        CRLB table over a config's sweep
    simulate    write a snapshot file for a config's first sweep point

Exit status is 0 on success, 1 when a stage fails and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .array_model import ArrayGeometry
from .baselines import Grid, iaa, music, peak_pick, spice, spice_pp
from .experiments import (
    ConfigError,
    bundled_configs,
    load_config,
    make_trial_data,
    override,
    run_crlb,
    run_montecarlo,
    run_spectrum,
)
from .io import ParseError, read_snapshots, write_estimate, write_snapshots
from .signal_sim import sample_covariance
from .spa import EstimationError, ParamEstimate, spa_estimate

THREADS_ENV = "GRIDLESS_DOA_THREADS"


class UsageError(Exception):
    pass


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _resolve_config(path: str):
    """Load a config by path, or by the stem of a bundled example."""
    p = Path(path)
    if not p.exists():
        bundled = bundled_configs()
        if path in bundled:
            p = bundled[path]
        else:
            raise UsageError(f"config not found: {path} (bundled: {', '.join(bundled)})")
    return load_config(p)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


def _out_dir(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.output:
        return Path(cfg.output)
    return Path("out") / cfg.name


def _parse_geometry(text: str, L: int) -> ArrayGeometry:
    if text is None:
        return ArrayGeometry.ula(L)
    text = text.strip()
    if "," in text or text.startswith("["):
        return ArrayGeometry([int(v) for v in text.strip("[]").split(",") if v.strip()])
    return ArrayGeometry.ula(int(text))


# ---------------------------------------------------------------- commands


def cmd_spectrum(args) -> int:
    cfg = _resolve_config(args.config)
    files = run_spectrum(cfg, _out_dir(args, cfg), args.seed)
    for label, path in files.items():
        print(f"{label}\t{path}")
    return 0


def cmd_montecarlo(args) -> int:
    cfg = _resolve_config(args.config)
    cfg = override(cfg, n_trials=args.trials, base_seed=args.seed)
    files = run_montecarlo(cfg, _out_dir(args, cfg), _threads(args))
    for label, path in files.items():
        print(f"{label}\t{path}")
    return 0


def cmd_crlb(args) -> int:
    cfg = _resolve_config(args.config)
    print(run_crlb(cfg, _out_dir(args, cfg)))
    return 0


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args.config)
    point = cfg.points()[0]
    if args.snr_db is not None:
        point["snr_db"] = args.snr_db
    if args.N is not None:
        point["N"] = args.N
    if math.isinf(point["N"]):
        raise UsageError("cannot simulate snapshots for N = inf")
    seed = cfg.base_seed if args.seed is None else args.seed
    data = make_trial_data(cfg, point, seed)
    out = Path(args.out or _out_dir(args, cfg))
    out.mkdir(parents=True, exist_ok=True)
    write_snapshots(out / "snapshots.txt", data.Y)
    truth = {"geometry": data.geometry.to_dict(), "thetas": list(cfg.scene.thetas),
             "powers": list(cfg.scene.powers), "sigma": data.sigma, "snr_db": point["snr_db"],
             "N": int(point["N"]), "seed": seed}
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    print(out / "snapshots.txt")
    return 0


def _dense_estimate(spectrum, K: int, method: str) -> ParamEstimate:
    thetas, short = peak_pick(spectrum, K)
    idx = np.rint(thetas * spectrum.grid.N_tilde).astype(int) % spectrum.grid.N_tilde
    diag = {"method": method, "short": short, **{k: v for k, v in spectrum.diagnostics.items() if k != "method"}}
    return ParamEstimate(thetas, spectrum.values[idx], np.zeros(0), diag)


def cmd_estimate(args) -> int:
    if args.method in ("music", "spice", "iaa") and args.K is None:
        raise UsageError(f"method {args.method} needs --K (the number of sources)")
    Y = read_snapshots(args.input)
    geom = _parse_geometry(args.geometry, Y.shape[0])
    if geom.L != Y.shape[0]:
        raise UsageError(f"geometry has {geom.L} sensors but the file has {Y.shape[0]} rows")
    grid = Grid(args.grid)
    N = Y.shape[1]
    if args.method == "spa":
        est = spa_estimate(Y, geom, args.mode)
    elif args.method in ("spice", "spice_pp"):
        res = spice(sample_covariance(Y), geom, N, grid, args.mode)
        if args.method == "spice":
            est = _dense_estimate(res.spectrum, args.K, "spice")
        else:
            est = spice_pp(res)
    elif args.method == "music":
        est = _dense_estimate(music(sample_covariance(Y), args.K, geom, grid), args.K, "music")
    else:
        est = _dense_estimate(iaa(Y, geom, grid), args.K, "iaa")
    out = Path(args.out) if args.out else Path("estimate.json")
    if out.suffix != ".json":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "estimate.json"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_estimate(out, est)
    print(out)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (path or bundled name)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--trials", type=_positive_int, help="override n_trials")
    common.add_argument("--seed", type=_seed, help="override the base seed")
    common.add_argument("--threads", type=_positive_int,
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(prog="gridless-doa", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, needs_config, text in (
        ("spectrum", cmd_spectrum, True, "one-realization spectra"),
        ("montecarlo", cmd_montecarlo, True, "Monte-Carlo sweep"),
        ("crlb", cmd_crlb, True, "CRLB over the sweep"),
        ("simulate", cmd_simulate, True, "write a snapshot file"),
        ("estimate", cmd_estimate, False, "estimate from a snapshot file"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.set_defaults(func=func, needs_config=needs_config)
        if name == "simulate":
            p.add_argument("--snr-db", type=float, dest="snr_db", help="override the SNR (dB)")
            p.add_argument("--N", type=_positive_int, help="override the snapshot count")
        if name == "estimate":
            p.add_argument("--input", required=True, help="snapshot file ('L N' header, re+imj entries)")
            p.add_argument("--geometry", help="sensor indices like 1,2,5,7, or a ULA length")
            p.add_argument("--method", default="spa", choices=("spa", "spice", "spice_pp", "music", "iaa"))
            p.add_argument("--mode", default="equal", choices=("equal", "distinct"))
            p.add_argument("--K", type=_positive_int, help="source count (music, spice, iaa)")
            p.add_argument("--grid", type=_positive_int, default=500, help="grid size for dense methods")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.needs_config and not args.config:
        parser.error(f"{args.command} needs --config")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gridless-doa {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"gridless-doa {args.command}: error [parse]: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"gridless-doa {args.command}: error [config]: {exc}", file=sys.stderr)
        return 1
    except EstimationError as exc:
        print(f"gridless-doa {args.command}: error {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"gridless-doa {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
