"""Sparse and parametric approach (SPA): gridless covariance fitting.

The noiseless covariance of sources at frequencies ``theta`` with powers ``p``
on an M-sensor ULA is the Hermitian Toeplitz matrix ``T(u)`` whose first row is

    u_m = sum_k p_k exp(-i 2 pi (m - 1) theta_k),   m = 1..M.

SPA fits ``R = Gamma T(u) Gamma^T + diag(sigma)`` to the sample covariance
through one of two covariance-fitting criteria, each cast as an SDP:

* ``f1 = ||R^{-1/2} (R~ - R) R~^{-1/2}||_F^2`` when ``R~`` is invertible,
* ``f2 = ||R^{-1/2} (R~ - R)||_F^2`` otherwise.

The fitted ``T(u*)`` is then made rank deficient by removing its smallest
eigenvalue (which moves into the noise) and the frequencies and powers are read
off the unique Vandermonde decomposition of the result.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from ._validation import check_covariance, check_geometry, check_mode, check_snapshots
from .array_model import ArrayGeometry, selection_matrix
from .sdp import LmiBuilder, SdpSolution, condition_number, hermitian_basis, matrix_sqrt
from .signal_sim import sample_covariance

logger = logging.getLogger(__name__)

#: relative duality gap / infeasibility targets for the SPA SDPs
DEFAULT_SDP_TOLS = {"gap_tol": 1e-8, "feas_tol": 1e-8, "max_iter": 100}
F1_MAX_CONDITION = 1e12


class EstimationError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str, diagnostics: dict | None = None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.diagnostics = diagnostics or {}


class RetrievalError(EstimationError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__("vandermonde_decompose", message, diagnostics)


# ---------------------------------------------------------------- Toeplitz


def toeplitz(u: np.ndarray) -> np.ndarray:
    """Hermitian Toeplitz matrix with first row ``u`` (``u[0]`` must be real)."""
    u = np.asarray(u, dtype=complex)
    if abs(u[0].imag) > 1e-12 * max(1.0, abs(u[0])):
        raise ValueError("u[0] must be real")
    u = u.copy()
    u[0] = u[0].real
    return scipy.linalg.toeplitz(u.conj(), u)


def toeplitz_param(thetas, powers, M: int) -> np.ndarray:
    """First row ``u`` of ``A(theta) diag(p) A(theta)^H`` for an M-sensor ULA."""
    thetas = np.asarray(thetas, dtype=float)
    powers = np.asarray(powers, dtype=float)
    lags = np.arange(M)
    u = np.exp(-2j * np.pi * np.mod(np.outer(lags, thetas), 1.0)) @ powers
    u[0] = u[0].real
    return u


def toeplitz_basis(M: int) -> np.ndarray:
    """Real basis of M x M Hermitian Toeplitz matrices, shape ``(2M - 1, M, M)``.

    Coordinates are ``[u_1, Re u_2, Im u_2, ..., Re u_M, Im u_M]``.
    """
    mats = np.zeros((2 * M - 1, M, M), dtype=complex)
    mats[0] = np.eye(M)
    for m in range(1, M):
        shift = np.eye(M, k=m)
        mats[2 * m - 1] = shift + shift.T
        mats[2 * m] = 1j * (shift - shift.T)
    return mats


def u_from_coords(x: np.ndarray) -> np.ndarray:
    u = np.empty((len(x) + 1) // 2, dtype=complex)
    u[0] = x[0]
    u[1:] = x[1::2] + 1j * x[2::2]
    return u


# ---------------------------------------------------------------- results


@dataclass
class CovarianceFit:
    """Solution of one SPA covariance-fitting SDP, in the caller's scale.

    ``sigma_star`` is the zero vector in equal-variance mode, where the common
    noise level lives inside ``u_star[0]``.
    """

    u_star: np.ndarray
    sigma_star: np.ndarray
    R_hat: np.ndarray
    objective: float
    criterion: str
    mode: str
    geometry: ArrayGeometry
    solution: SdpSolution | None = field(default=None, repr=False)
    fallback: bool = False

    @property
    def diagnostics(self) -> dict:
        d = {"criterion": self.criterion, "mode": self.mode, "objective": self.objective,
             "f1_fallback": self.fallback}
        if self.solution is not None:
            d.update(self.solution.diagnostics())
        return d


@dataclass
class ParamEstimate:
    """Frequencies (ascending), powers and noise variances of one estimate."""

    thetas: np.ndarray
    powers: np.ndarray
    sigma: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return len(self.thetas)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                return v.item()
            return v

        return {
            "thetas": [float(t) for t in self.thetas],
            "powers": [float(p) for p in self.powers],
            "sigma": [float(s) for s in np.atleast_1d(self.sigma)],
            "r": self.r,
            "diagnostics": {k: clean(v) for k, v in self.diagnostics.items()},
        }

    @classmethod
    def from_dict(cls, record: dict) -> "ParamEstimate":
        est = cls(
            np.asarray(record["thetas"], dtype=float),
            np.asarray(record["powers"], dtype=float),
            np.asarray(record["sigma"], dtype=float),
            dict(record.get("diagnostics", {})),
        )
        if "r" in record and int(record["r"]) != est.r:
            raise ValueError("record field 'r' disagrees with the number of frequencies")
        return est


# ---------------------------------------------------------------- covariance fitting


def _embedded_toeplitz_basis(geom: ArrayGeometry) -> np.ndarray:
    gamma = selection_matrix(geom)
    return np.einsum("lm,kmn,jn->klj", gamma, toeplitz_basis(geom.M), gamma)


def _build_fit(geom: ArrayGeometry, mode: str, corner: np.ndarray, x_size: int,
               x_cost_diag: np.ndarray | None, u_cost: np.ndarray, sigma_cost: np.ndarray,
               whiten: np.ndarray | None = None):
    """Assemble ``[[X, corner^H], [corner, R(u, sigma)]] >= 0`` plus cone side constraints.

    ``corner`` is ``L x x_size``; the X block carries ``tr(X)`` (or a scalar x).
    With a Hermitian ``whiten`` matrix W the lower row and column are
    multiplied by W, i.e. the congruent block ``[[X, (W c)^H], [W c, W R W]]``
    is used. This leaves the feasible set unchanged and keeps the block well
    conditioned at the optimum when ``W R W`` is close to the identity.
    """
    L, M = geom.L, geom.M
    lmi = LmiBuilder()
    xb = hermitian_basis(x_size)
    x_cost = np.zeros(x_size * x_size)
    x_cost[:x_size] = 1.0 if x_cost_diag is None else x_cost_diag
    vx = lmi.add_variables("X", x_size * x_size, cost=x_cost)
    vu = lmi.add_variables("u", 2 * M - 1, cost=u_cost)
    n = x_size + L
    W = np.eye(L) if whiten is None else whiten
    corner = W @ corner
    const = np.zeros((n, n), dtype=complex)
    const[x_size:, :x_size] = corner
    const[:x_size, x_size:] = corner.conj().T
    blk = lmi.add_block("s", n, const)
    pad = np.zeros((xb.shape[0], n, n), dtype=complex)
    pad[:, :x_size, :x_size] = xb
    lmi.add_terms(blk, vx, pad)
    tb = _embedded_toeplitz_basis(geom)
    pad = np.zeros((tb.shape[0], n, n), dtype=complex)
    pad[:, x_size:, x_size:] = W @ tb @ W
    lmi.add_terms(blk, vu, pad)
    if mode == "distinct":
        vs = lmi.add_variables("sigma", L, cost=sigma_cost)
        pad = np.zeros((L, n, n), dtype=complex)
        pad[:, x_size:, x_size:] = np.einsum("ik,jk->kij", W, W.conj())
        lmi.add_terms(blk, vs, pad)
        lb = lmi.add_block("l", L)
        lmi.add_terms(lb, vs, np.eye(L))
    # for an equal-variance ULA, T(u) >= 0 is implied by the big block
    if mode == "distinct" or not geom.is_ula:
        tblk = lmi.add_block("s", M)
        lmi.add_terms(tblk, vu, toeplitz_basis(M))
    return lmi


def _finish_fit(lmi, geom, mode, scale, criterion, obj_scale, fallback=False) -> CovarianceFit:
    values, sol = lmi.solve(**_sdp_tols)
    u = u_from_coords(values["u"]) * scale
    sigma = values["sigma"] * scale if mode == "distinct" else np.zeros(geom.L)
    gamma = selection_matrix(geom)
    R_hat = gamma @ toeplitz(u) @ gamma.T + np.diag(sigma)
    if not sol.optimal:
        raise EstimationError("fit_covariance", f"SDP solver returned status {sol.status}",
                              sol.diagnostics())
    # user objective c^T y is minus the dual objective
    objective = -sol.dual_objective * obj_scale
    return CovarianceFit(u, sigma, R_hat, objective, criterion, mode, geom, sol, fallback)


_sdp_tols = dict(DEFAULT_SDP_TOLS)


def set_sdp_tolerances(**tols) -> None:
    """Override the SDP tolerances used by the SPA fits (process-wide)."""
    unknown = set(tols) - set(DEFAULT_SDP_TOLS)
    if unknown:
        raise ValueError(f"unknown tolerance names {sorted(unknown)}")
    _sdp_tols.update(tols)


def select_criterion(R_tilde: np.ndarray, N: float | None, L: int) -> tuple[str, bool]:
    """Pick ``"f1"`` when ``N >= L`` and ``R~`` is well conditioned, else ``"f2"``.

    Returns the criterion and whether f1 was wanted but abandoned because
    ``R~`` is numerically singular.
    """
    enough = N is None or N >= L
    if not enough:
        return "f2", False
    if condition_number(R_tilde) <= F1_MAX_CONDITION:
        return "f1", False
    logger.warning("sample covariance is near singular; falling back to the f2 criterion")
    return "f2", True


def fit_covariance(
    R_tilde: np.ndarray,
    geom: ArrayGeometry,
    N: float | None = None,
    mode: str = "equal",
    criterion: str = "auto",
) -> CovarianceFit:
    """Solve the SPA covariance-fitting SDP for a sample covariance.

    Args:
        R_tilde: L x L sample covariance (Hermitian PSD).
        geom: Array geometry.
        N: Number of snapshots behind ``R_tilde``; ``None`` means the exact
            covariance (infinitely many snapshots).
        mode: ``"equal"`` or ``"distinct"`` noise variances.
        criterion: ``"f1"``, ``"f2"`` or ``"auto"``.
    """
    geom = check_geometry(geom)
    mode = check_mode(mode)
    R_tilde = check_covariance(R_tilde, geom.L)
    L = geom.L
    fallback = False
    if criterion == "auto":
        criterion, fallback = select_criterion(R_tilde, N, L)
    elif criterion not in ("f1", "f2"):
        raise ValueError("criterion must be 'f1', 'f2' or 'auto'")
    scale = float(np.trace(R_tilde).real) / L
    if scale <= 0:
        raise EstimationError("fit_covariance", "sample covariance is zero")
    Rn = R_tilde / scale
    tb = _embedded_toeplitz_basis(geom)
    whiten = None
    if criterion == "f1":
        corner = matrix_sqrt(Rn)
        weight = np.linalg.inv(Rn)
        weight = (weight + weight.conj().T) / 2.0
        whiten = _inverse_sqrt(Rn)
        obj_scale = 1.0
    else:
        corner = Rn
        weight = np.eye(L)
        obj_scale = scale
    u_cost = np.einsum("ij,kji->k", weight, tb).real
    sigma_cost = np.diag(weight).real
    lmi = _build_fit(geom, mode, corner, L, None, u_cost, sigma_cost, whiten)
    return _finish_fit(lmi, geom, mode, scale, criterion, obj_scale, fallback)


def _inverse_sqrt(A: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(A)
    return (V / np.sqrt(w)) @ V.conj().T


def fit_single_snapshot(y: np.ndarray, geom: ArrayGeometry, mode: str = "equal") -> CovarianceFit:
    """Single-snapshot fit: ``min x + tr(R)`` s.t. ``[[x, |y| y^H], [|y| y, R]] >= 0``.

    This is the f2 fit specialized to ``R~ = y y^H`` with a scalar in place of
    the L x L matrix ``X``; both have the same optimal value.
    """
    geom = check_geometry(geom)
    mode = check_mode(mode)
    y = check_snapshots(y, geom.L)
    if y.shape[1] != 1:
        raise ValueError("fit_single_snapshot needs exactly one snapshot")
    y = y[:, 0]
    norm2 = float(np.vdot(y, y).real)
    if norm2 == 0.0:
        raise EstimationError("fit_single_snapshot", "snapshot is identically zero")
    scale = norm2 / geom.L
    yn = y / np.sqrt(scale)
    corner = (np.linalg.norm(yn) * yn)[:, None]
    tb = _embedded_toeplitz_basis(geom)
    u_cost = np.einsum("kii->k", tb).real
    lmi = _build_fit(geom, mode, corner, 1, np.ones(1), u_cost, np.ones(geom.L))
    return _finish_fit(lmi, geom, mode, scale, "single", scale)


# ---------------------------------------------------------------- postprocessing


def postprocess(fit: CovarianceFit) -> tuple[np.ndarray, np.ndarray]:
    """Split ``R_hat`` so that the source part ``T(u_hat)`` is rank deficient.

    Returns ``(u_hat, sigma_hat)`` with ``T(u_hat) = T(u*) - lambda_min I`` and
    ``sigma_hat = sigma* + lambda_min``.
    """
    return postprocess_u(fit.u_star, fit.sigma_star)


def postprocess_u(u_star: np.ndarray, sigma_star: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u_star = np.asarray(u_star, dtype=complex)
    lam = float(np.linalg.eigvalsh(toeplitz(u_star))[0])
    u_hat = u_star.copy()
    u_hat[0] = u_star[0].real - lam
    sigma_hat = np.clip(np.asarray(sigma_star, dtype=float) + lam, 0.0, None)
    return u_hat, sigma_hat


# ---------------------------------------------------------------- Vandermonde decomposition


def _lag_sequence(u: np.ndarray) -> np.ndarray:
    """Samples ``c_n = sum_k p_k z_k^n`` for ``n = -(M-1)..(M-1)``."""
    return np.concatenate([u[::-1], u[1:].conj()])


def _annihilating_filter(u: np.ndarray, r: int, T: np.ndarray) -> np.ndarray:
    """Polynomial coefficients (highest power first) whose roots are ``exp(i 2 pi theta)``."""
    M = len(u)
    if r == M - 1:
        # null vector h of T(u): sum_m h_m z^{M-m} vanishes at every source
        _, V = np.linalg.eigh(T)
        return V[:, 0]
    c = _lag_sequence(u)
    # rows [c_n, c_{n-1}, ..., c_{n-r}] for every n with all indices in range
    H = scipy.linalg.toeplitz(c[r:], c[r::-1])
    _, _, Vh = np.linalg.svd(H)
    return Vh[-1].conj()


def _solve_powers(u: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    M = len(u)
    lags = np.arange(M)
    A = np.exp(2j * np.pi * np.mod(np.outer(lags, thetas), 1.0))
    lhs = np.vstack([A, A[1:].conj()])
    rhs = np.concatenate([u.conj(), u[1:]])
    p, _ = scipy.optimize.nnls(np.vstack([lhs.real, lhs.imag]), np.concatenate([rhs.real, rhs.imag]))
    return p


def vandermonde_decompose(
    u_hat: np.ndarray,
    rank_tol: float = 1e-8,
    prune_tol: float = 1e-10,
    max_root_deviation: float = 0.1,
) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies and powers with ``T(u_hat) = A(theta) diag(p) A(theta)^H``.

    The numerical rank ``r`` counts eigenvalues above ``rank_tol * lambda_max``
    and is capped at ``M - 1``. Frequencies are the angles of the roots of an
    annihilating polynomial (the null vector of ``T`` when ``r = M - 1``, else
    a degree-``r`` Prony filter on the lag sequence), projected to the unit
    circle. Powers solve the stacked lag equations by nonnegative least
    squares; components below ``prune_tol * max(p)`` are dropped.

    If the reconstruction misses ``T(u_hat)`` by more than ``1e-6`` relative
    the rank is raised until it does not (ending at ``M - 1``, where the
    decomposition is exact for PSD input).

    The default ``rank_tol`` absorbs the residue an SDP solver leaves behind.
    For an exactly known Toeplitz matrix a value near machine precision
    (``1e-12``) resolves components whose eigenvalues fall below ``1e-8``.
    """
    u = np.asarray(u_hat, dtype=complex)
    M = len(u)
    T = toeplitz(u)
    w = np.linalg.eigvalsh(T)
    lam_max = w[-1]
    if M == 1 or lam_max <= 0:
        return np.zeros(0), np.zeros(0)
    r = int(np.sum(w > rank_tol * lam_max))
    r = min(max(r, 0), M - 1)
    if r == 0:
        return np.zeros(0), np.zeros(0)
    normT = np.linalg.norm(T)
    best = None
    for rank in range(r, M):
        coeffs = _annihilating_filter(u, rank, T)
        roots = np.roots(coeffs)
        if roots.size == 0:
            continue
        deviation = np.abs(np.abs(roots) - 1.0)
        if deviation.max() > max_root_deviation:
            if rank == M - 1:
                raise RetrievalError(
                    f"annihilating polynomial has roots off the unit circle (max deviation {deviation.max():.3g})",
                    {"rank": rank, "root_moduli": np.abs(roots).tolist()},
                )
            continue
        thetas = np.mod(np.angle(roots) / (2 * np.pi), 1.0)
        thetas[thetas >= 1.0] = 0.0  # mod of a tiny negative angle rounds up to 1
        powers = _solve_powers(u, thetas)
        keep = powers > prune_tol * powers.max() if powers.max() > 0 else np.zeros(len(powers), bool)
        thetas, powers = thetas[keep], powers[keep]
        if len(thetas) and np.sum(keep) < len(keep):
            powers = _solve_powers(u, thetas)
        order = np.argsort(thetas)
        thetas, powers = thetas[order], powers[order]
        resid = np.linalg.norm(T - _forward(thetas, powers, M)) / normT
        if best is None or resid < best[0]:
            best = (resid, thetas, powers)
        if resid <= 1e-6:
            break
    if best is None:
        raise RetrievalError("no annihilating polynomial could be formed", {"rank": r})
    return best[1], best[2]


def _forward(thetas, powers, M) -> np.ndarray:
    return toeplitz(toeplitz_param(thetas, powers, M)) if len(thetas) else np.zeros((M, M))


# ---------------------------------------------------------------- pipeline


def estimate_from_fit(fit: CovarianceFit, rank_tol: float = 1e-8) -> ParamEstimate:
    """Postprocess a covariance fit and decompose it."""
    u_hat, sigma_hat = postprocess(fit)
    thetas, powers = vandermonde_decompose(u_hat, rank_tol=rank_tol)
    diag = fit.diagnostics
    diag["lambda_min"] = float(fit.u_star[0].real - u_hat[0].real)
    return ParamEstimate(thetas, powers, sigma_hat, diag)


def spa_estimate_covariance(
    R_tilde: np.ndarray,
    geom: ArrayGeometry,
    N: float | None = None,
    mode: str = "equal",
    rank_tol: float = 1e-8,
) -> ParamEstimate:
    """SPA from a covariance matrix (``N=None`` for an exact covariance)."""
    fit = fit_covariance(R_tilde, geom, N, mode)
    return estimate_from_fit(fit, rank_tol)


def spa_estimate(Y: np.ndarray, geom: ArrayGeometry, mode: str = "equal", rank_tol: float = 1e-8) -> ParamEstimate:
    """Full SPA pipeline on an L x N snapshot matrix."""
    geom = check_geometry(geom)
    Y = check_snapshots(Y, geom.L)
    N = Y.shape[1]
    if N == 1:
        fit = fit_single_snapshot(Y, geom, mode)
    else:
        fit = fit_covariance(sample_covariance(Y), geom, N, mode)
    return estimate_from_fit(fit, rank_tol)
