"""Dense Hermitian linear algebra used by the solver and the estimators."""

from __future__ import annotations

import numpy as np
import scipy.linalg


class RankDeficiencyError(np.linalg.LinAlgError):
    pass


def is_hermitian(A: np.ndarray, rtol: float = 1e-12) -> bool:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    scale = max(np.abs(A).max(initial=0.0), 1e-300)
    return bool(np.abs(A - A.conj().T).max(initial=0.0) <= rtol * scale)


def hermitian_part(A: np.ndarray) -> np.ndarray:
    return (A + A.conj().T) / 2.0


def hermitian_to_real(A: np.ndarray) -> np.ndarray:
    """Real symmetric embedding ``[[Re A, -Im A], [Im A, Re A]]``.

    ``A`` is PSD exactly when the embedding is; every eigenvalue of ``A``
    appears twice in the embedding.
    """
    A = np.asarray(A)
    re, im = A.real, A.imag
    return np.block([[re, -im], [im, re]])


def real_to_hermitian(W: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hermitian_to_real`, averaging the redundant copies."""
    n = W.shape[0] // 2
    re = (W[:n, :n] + W[n:, n:]) / 2.0
    im = (W[n:, :n] - W[:n, n:]) / 2.0
    return hermitian_part(re + 1j * im)


def eig(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    return np.linalg.eigh(hermitian_part(np.asarray(A)))


def min_eigenvalue(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(np.asarray(A)))[0])


def matrix_sqrt(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Hermitian PSD square root; tiny negative eigenvalues are clipped to 0."""
    w, V = eig(A)
    scale = max(abs(w[-1]), abs(w[0]), 1e-300)
    if w[0] < -tol * scale:
        raise ValueError(f"matrix is indefinite (min eigenvalue {w[0]:.3g})")
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T
    return hermitian_part(root)


def hermitian_solve(A: np.ndarray, B: np.ndarray, rcond: float = 1e-14) -> np.ndarray:
    """Solve ``A X = B`` for Hermitian ``A``; raise on numerically singular ``A``."""
    A = hermitian_part(np.asarray(A))
    w = np.linalg.eigvalsh(A)
    amax = np.abs(w).max(initial=0.0)
    if amax == 0.0 or np.abs(w).min() <= rcond * amax:
        cond = np.inf if amax == 0.0 else amax / max(np.abs(w).min(), 1e-300)
        raise RankDeficiencyError(f"matrix is singular to working precision (cond ~ {cond:.3g})")
    return scipy.linalg.solve(A, B, assume_a="her")


def condition_number(A: np.ndarray) -> float:
    w = np.abs(np.linalg.eigvalsh(hermitian_part(np.asarray(A))))
    return float(np.inf if w.min() == 0.0 else w.max() / w.min())
