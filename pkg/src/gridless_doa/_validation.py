"""Input checks shared by the functional API and the estimator classes."""

from __future__ import annotations

import numpy as np

from .array_model import ArrayGeometry

MODES = ("equal", "distinct")
_MODE_ALIASES = {
    "equal": "equal",
    "equal-variance": "equal",
    "distinct": "distinct",
    "distinct-variance": "distinct",
    "different": "distinct",
}


def check_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise ValueError(f"mode must be 'equal' or 'distinct', got {mode!r}") from None


def check_geometry(geom) -> ArrayGeometry:
    if isinstance(geom, ArrayGeometry):
        return geom
    if isinstance(geom, int):
        return ArrayGeometry.ula(geom)
    if isinstance(geom, dict):
        return ArrayGeometry.from_dict(geom)
    return ArrayGeometry(geom)


def check_snapshots(Y, L: int | None = None) -> np.ndarray:
    """Return ``Y`` as a finite complex ``L x N`` array."""
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2 or Y.size == 0:
        raise ValueError(f"snapshots must be a nonempty L x N matrix, got shape {Y.shape}")
    Y = Y.astype(complex)
    if not np.all(np.isfinite(Y)):
        raise ValueError("snapshots contain non-finite entries")
    if L is not None and Y.shape[0] != L:
        raise ValueError(f"snapshots have {Y.shape[0]} rows but the array has {L} sensors")
    return Y


def check_covariance(R, L: int | None = None, psd_tol: float = 1e-10) -> np.ndarray:
    """Return ``R`` as an exactly Hermitian PSD ``L x L`` array."""
    R = np.asarray(R, dtype=complex)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError(f"covariance must be square, got shape {R.shape}")
    if L is not None and R.shape[0] != L:
        raise ValueError(f"covariance is {R.shape[0]} x {R.shape[0]} but the array has {L} sensors")
    if not np.all(np.isfinite(R)):
        raise ValueError("covariance contains non-finite entries")
    scale = max(np.abs(R).max(), 1e-300)
    if np.abs(R - R.conj().T).max() > 1e-8 * scale:
        raise ValueError("covariance is not Hermitian")
    R = (R + R.conj().T) / 2.0
    w = np.linalg.eigvalsh(R)
    if w[-1] <= 0 or w[0] < -psd_tol * w[-1]:
        raise ValueError("covariance is not positive semidefinite")
    return R
