"""Grid-based comparison methods: SPICE, SPICE-PP, MUSIC and IAA.

All dense methods work on a uniform frequency grid ``theta_j = j / N_tilde``
and return a :class:`Spectrum`. Point estimates come from :func:`peak_pick`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._validation import check_covariance, check_geometry, check_mode, check_snapshots
from .array_model import ArrayGeometry, steering_matrix
from .sdp import matrix_sqrt
from .spa import ParamEstimate, postprocess_u, toeplitz_param, vandermonde_decompose
from .signal_sim import sample_covariance

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 500
MAX_ITER = 500
REL_TOL = 1e-6


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``N_tilde`` frequencies on ``[0, 1)``."""

    N_tilde: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        if int(self.N_tilde) != self.N_tilde or self.N_tilde < 2:
            raise ValueError(f"grid size must be an integer >= 2, got {self.N_tilde}")
        object.__setattr__(self, "N_tilde", int(self.N_tilde))

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.N_tilde) / self.N_tilde

    @property
    def step(self) -> float:
        return 1.0 / self.N_tilde


def _as_grid(grid) -> Grid:
    if grid is None:
        return Grid()
    return grid if isinstance(grid, Grid) else Grid(int(grid))


@dataclass
class Spectrum:
    """Nonnegative power (or pseudo power) per grid point."""

    grid: Grid
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.N_tilde,):
            raise ValueError("spectrum length must match the grid")
        if np.any(self.values < 0):
            raise ValueError("spectrum values must be nonnegative")

    @property
    def thetas(self) -> np.ndarray:
        return self.grid.points


# ---------------------------------------------------------------- SPICE


@dataclass
class SpiceResult:
    """Fixed point of the SPICE iterations.

    Attributes:
        powers: Grid powers ``p~``, one per grid point.
        sigma: Noise variance per sensor (all equal in equal-variance mode).
        R_hat: Fitted covariance ``A diag(p~) A^H + diag(sigma)``.
        objective: Final criterion value (f1 or f2, zero at a perfect fit).
        objectives: Criterion value after every iteration, starting with the
            initial point.
        converged: Whether the relative objective change fell below the
            tolerance before ``max_iter`` iterations.
    """

    grid: Grid
    powers: np.ndarray
    sigma: np.ndarray
    R_hat: np.ndarray
    objective: float
    objectives: list[float]
    iterations: int
    converged: bool
    criterion: str
    mode: str
    geometry: ArrayGeometry

    @property
    def spectrum(self) -> Spectrum:
        return Spectrum(self.grid, self.powers, {"method": "spice", "converged": self.converged})


def _spice_objective(R, R_tilde, Rt_inv, criterion) -> float:
    if criterion == "f1":
        val = np.trace(np.linalg.solve(R, R_tilde)).real + np.trace(Rt_inv @ R).real
        return float(val - 2 * R.shape[0])
    return float(np.trace(R_tilde @ np.linalg.solve(R, R_tilde)).real + np.trace(R).real
                 - 2 * np.trace(R_tilde).real)


def spice(
    R_tilde,
    geom,
    N: float | None = None,
    grid=None,
    mode: str = "equal",
    criterion: str = "auto",
    max_iter: int = MAX_ITER,
    tol: float = REL_TOL,
) -> SpiceResult:
    """Fit ``A(theta~) diag(p~) A^H + diag(sigma)`` to ``R_tilde`` by SPICE.

    The same criteria as SPA are used (``f1`` for ``N >= L`` with an
    invertible ``R_tilde``, else ``f2``). Each iteration rescales every power
    by the ratio of its gradient terms, which never increases the criterion.

    Args:
        R_tilde: L x L sample covariance.
        geom: Array geometry.
        N: Snapshot count (``None`` for an exact covariance).
        grid: :class:`Grid` or grid size.
        mode: ``"equal"`` or ``"distinct"`` noise variances.
        criterion: ``"f1"``, ``"f2"`` or ``"auto"``.
        max_iter: Iteration cap.
        tol: Stop once the relative change of the criterion is below this.
    """
    from .spa import select_criterion

    geom = check_geometry(geom)
    mode = check_mode(mode)
    grid = _as_grid(grid)
    R_tilde = check_covariance(R_tilde, geom.L)
    L = geom.L
    if criterion == "auto":
        criterion, _ = select_criterion(R_tilde, N, L)
    elif criterion not in ("f1", "f2"):
        raise ValueError("criterion must be 'f1', 'f2' or 'auto'")

    A = steering_matrix(geom, grid.points)
    if criterion == "f1":
        Rt_inv = np.linalg.inv(R_tilde)
        Rt_inv = (Rt_inv + Rt_inv.conj().T) / 2.0
        G = matrix_sqrt(R_tilde)
        w_grid = np.einsum("lj,lm,mj->j", A.conj(), Rt_inv, A).real
        w_noise = np.diag(Rt_inv).real
    else:
        Rt_inv = None
        G = R_tilde
        w_grid = np.full(grid.N_tilde, float(L))
        w_noise = np.ones(L)
    sw_grid = np.sqrt(w_grid)

    # periodogram-style start
    p = np.einsum("lj,lm,mj->j", A.conj(), R_tilde, A).real / L**2
    p = np.clip(p, 0.0, None)
    diag = np.diag(R_tilde).real
    sigma = np.full(L, diag.mean()) if mode == "equal" else diag.copy()

    def model(p, sigma):
        return (A * p) @ A.conj().T + np.diag(sigma)

    R = model(p, sigma)
    objectives = [_spice_objective(R, R_tilde, Rt_inv, criterion)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Q = scipy.linalg.solve(R, G, assume_a="her")
        p = p * np.linalg.norm(A.conj().T @ Q, axis=1) / sw_grid
        row_norms = np.linalg.norm(Q, axis=1)
        if mode == "equal":
            sigma = np.full(L, sigma[0] * np.linalg.norm(row_norms) / np.sqrt(w_noise.sum()))
        else:
            sigma = sigma * row_norms / np.sqrt(w_noise)
        R = model(p, sigma)
        objectives.append(_spice_objective(R, R_tilde, Rt_inv, criterion))
        prev, cur = objectives[-2], objectives[-1]
        if abs(prev - cur) <= tol * max(abs(prev), 1e-300):
            converged = True
            break
    return SpiceResult(grid, p, sigma, R, objectives[-1], objectives, it, converged,
                       criterion, mode, geom)


def spice_pp(result: SpiceResult, rank_tol: float = 1e-8) -> ParamEstimate:
    """SPICE followed by the SPA postprocessing and Vandermonde decomposition.

    The source part of ``R_hat`` is the Toeplitz matrix generated by the grid
    powers over the full virtual aperture, so ``u~`` is read off ``p~``
    directly. On a redundancy array this equals averaging ``R_hat`` over each
    nonzero coarray lag.
    """
    geom = result.geometry
    u = toeplitz_param(result.grid.points, result.powers, geom.M)
    sigma = result.sigma if result.mode == "distinct" else np.zeros(geom.L)
    if result.mode == "equal":
        u[0] += result.sigma[0]
    u_hat, sigma_hat = postprocess_u(u, sigma)
    thetas, powers = vandermonde_decompose(u_hat, rank_tol=rank_tol)
    diag = {"method": "spice_pp", "spice_converged": result.converged,
            "spice_iterations": result.iterations}
    return ParamEstimate(thetas, powers, sigma_hat, diag)


# ---------------------------------------------------------------- MUSIC / IAA


def music(R_tilde, K: int, geom, grid=None) -> Spectrum:
    """MUSIC pseudospectrum ``1 / ||E_n^H a(theta)||^2`` for ``K`` sources."""
    geom = check_geometry(geom)
    grid = _as_grid(grid)
    R_tilde = check_covariance(R_tilde, geom.L)
    if int(K) != K or not 1 <= K < geom.L:
        raise ValueError(f"MUSIC needs 1 <= K < L = {geom.L}, got K={K}")
    _, V = np.linalg.eigh(R_tilde)
    En = V[:, : geom.L - int(K)]
    A = steering_matrix(geom, grid.points)
    denom = np.sum(np.abs(En.conj().T @ A) ** 2, axis=0)
    return Spectrum(grid, 1.0 / np.maximum(denom, 1e-300), {"method": "music", "K": int(K)})


def iaa(Y, geom, grid=None, max_iter: int = MAX_ITER, tol: float = REL_TOL) -> Spectrum:
    """Iterative adaptive approach on an L x N snapshot matrix.

    Starts from the beamformer powers and iterates
    ``p_j = mean_t |a_j^H R^-1 y(t)|^2 / (a_j^H R^-1 a_j)^2`` with
    ``R = A diag(p) A^H`` until the relative change of ``||p||`` is below ``tol``.
    """
    geom = check_geometry(geom)
    grid = _as_grid(grid)
    Y = check_snapshots(Y, geom.L)
    L = geom.L
    A = steering_matrix(geom, grid.points)
    R_tilde = sample_covariance(Y)
    p = np.einsum("lj,lm,mj->j", A.conj(), R_tilde, A).real / L**2
    ridged = False
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        R = (A * p) @ A.conj().T
        try:
            cf = scipy.linalg.cho_factor(R, lower=True)
        except np.linalg.LinAlgError:
            R = R + 1e-10 * np.trace(R).real / L * np.eye(L)
            ridged = True
            cf = scipy.linalg.cho_factor(R, lower=True)
        RiA = scipy.linalg.cho_solve(cf, A)
        num = np.einsum("lj,lm,mj->j", RiA.conj(), R_tilde, RiA).real
        den = np.einsum("lj,lj->j", A.conj(), RiA).real
        p_new = np.clip(num / den**2, 0.0, None)
        change = np.linalg.norm(p_new - p) / max(np.linalg.norm(p), 1e-300)
        p = p_new
        if change < tol:
            converged = True
            break
    diag = {"method": "iaa", "iterations": it, "converged": converged, "ridge": ridged}
    return Spectrum(grid, p, diag)


# ---------------------------------------------------------------- peak picking


def peak_pick(spectrum: Spectrum, K: int) -> tuple[np.ndarray, bool]:
    """Grid frequencies of the ``K`` largest local maxima, ascending.

    A local maximum is strictly larger than both neighbours (the grid wraps
    around). If there are fewer than ``K`` of them the remainder is filled with
    the largest other grid values, ties going to the lower index, and the
    returned flag is True.
    """
    if int(K) != K or K < 1:
        raise ValueError(f"K must be a positive integer, got {K}")
    K = int(K)
    v = spectrum.values
    is_peak = (v > np.roll(v, 1)) & (v > np.roll(v, -1))
    peaks = np.flatnonzero(is_peak)
    # stable sort on -v keeps lower indices first among equal values
    peaks = peaks[np.argsort(-v[peaks], kind="stable")]
    short = len(peaks) < K
    chosen = list(peaks[:K])
    if short:
        rest = np.argsort(-v, kind="stable")
        taken = set(chosen)
        for j in rest:
            if len(chosen) == min(K, len(v)):
                break
            if j not in taken:
                chosen.append(j)
                taken.add(j)
    return np.sort(spectrum.grid.points[np.asarray(chosen, dtype=int)]), short
