"""Plain-text file formats: snapshot matrices, estimates, spectra and trial tables.

Snapshot files hold a header line ``L N`` followed by N lines, one snapshot
per line, each with L complex entries written as ``re+imj``. Every number is
written with ``%.17g`` so files round-trip exactly; CSV tables use ``%.12g``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .metrics import TRIAL_FIELDS, TrialResult
from .spa import ParamEstimate


class ParseError(ValueError):
    """Malformed input; ``line`` and ``field`` are 1-based (0 when unknown)."""

    def __init__(self, message: str, line: int = 0, field: int = 0, path: str | None = None):
        where = f"{path or '<input>'}:{line}" + (f" field {field}" if field else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.field = field


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def format_snapshots(Y: np.ndarray) -> str:
    Y = np.asarray(Y, dtype=complex)
    if Y.ndim != 2:
        raise ValueError("snapshots must be an L x N matrix")
    L, N = Y.shape
    lines = [f"{L} {N}"]
    lines += [" ".join(_fmt_complex(z) for z in Y[:, t]) for t in range(N)]
    return "\n".join(lines) + "\n"


def write_snapshots(path: str | Path, Y: np.ndarray) -> None:
    Path(path).write_text(format_snapshots(Y))


def parse_snapshots(text: str, path: str | None = None) -> np.ndarray:
    """Parse a snapshot file body into an L x N complex matrix."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ParseError("empty snapshot file", path=path)
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise ParseError(f"header must be 'L N', got {header!r}", lineno, path=path)
    try:
        L, N = (int(p) for p in parts)
    except ValueError:
        raise ParseError(f"header must hold two integers, got {header!r}", lineno, path=path) from None
    if L < 1 or N < 1:
        raise ParseError("L and N must be positive", lineno, path=path)
    body = lines[1:]
    if len(body) != N:
        last = body[-1][0] if body else lineno
        raise ParseError(f"expected {N} snapshot lines, found {len(body)}", last, path=path)
    Y = np.empty((L, N), dtype=complex)
    for t, (lineno, ln) in enumerate(body):
        tokens = ln.split()
        if len(tokens) != L:
            raise ParseError(f"expected {L} entries, found {len(tokens)}", lineno, path=path)
        for l, tok in enumerate(tokens):
            try:
                z = complex(tok)
            except ValueError:
                raise ParseError(f"not a complex number: {tok!r}", lineno, l + 1, path) from None
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise ParseError(f"non-finite entry {tok!r}", lineno, l + 1, path)
            Y[l, t] = z
    return Y


def read_snapshots(path: str | Path) -> np.ndarray:
    return parse_snapshots(Path(path).read_text(), str(path))


# ---------------------------------------------------------------- estimates


def write_estimate(path: str | Path, estimate: ParamEstimate) -> None:
    Path(path).write_text(json.dumps(estimate.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n")


def read_estimate(path: str | Path) -> ParamEstimate:
    try:
        record = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno, str(path)) from None
    return ParamEstimate.from_dict(record)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------- CSV


def fmt_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return "%.12g" % x


def write_csv(path: str | Path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt_number(v) for v in row])


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_spectrum(path: str | Path, thetas, values) -> None:
    """Two-column ``theta,power`` CSV (dense spectrum or discrete estimate)."""
    write_csv(path, ("theta", "power"), zip(np.asarray(thetas, float), np.asarray(values, float)))


def write_trials(path: str | Path, trials: Iterable[TrialResult], extra: Iterable[str] = ()) -> None:
    extra = tuple(extra)
    rows = []
    for tr in trials:
        row = tr.row()
        rows.append([row[k] for k in TRIAL_FIELDS] + [tr.extra.get(k, "") for k in extra])
    write_csv(path, TRIAL_FIELDS + extra, rows)
