"""Frequency-estimate scoring, the grid error floor and a stochastic CRLB."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from ._validation import check_geometry, check_mode
from .array_model import ArrayGeometry, circular_distance, steering_matrix
from .signal_sim import NoiseSpec, SourceScene

#: squared-distance charge for a true source with no estimate left to match
MISSING_PENALTY = 0.5**2

TRIAL_FIELDS = ("method", "seed", "snr_db", "N", "mse", "runtime_s", "converged")


@dataclass
class TrialResult:
    """Outcome of one method on one Monte-Carlo trial."""

    method: str
    seed: int
    snr_db: float
    N: float
    mse: float
    runtime_s: float
    converged: bool = True
    thetas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    note: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.mse >= 0:
            raise ValueError(f"MSE must be nonnegative, got {self.mse}")

    def row(self) -> dict:
        return {
            "method": self.method,
            "seed": int(self.seed),
            "snr_db": float(self.snr_db),
            "N": self.N,
            "mse": float(self.mse),
            "runtime_s": float(self.runtime_s),
            "converged": bool(self.converged),
        }


def top_k(estimate, K: int) -> tuple[np.ndarray, bool]:
    """The ``K`` frequencies carrying the most power, sorted ascending.

    Accepts a ``ParamEstimate`` (or anything with ``thetas``/``powers``).
    Returns the frequencies and a flag that is True when fewer than ``K``
    components were available; ties in power go to the earlier component.
    """
    if int(K) != K or K < 1:
        raise ValueError(f"K must be a positive integer, got {K}")
    thetas = np.asarray(estimate.thetas, dtype=float)
    powers = np.asarray(estimate.powers, dtype=float)
    order = np.argsort(-powers, kind="stable")[: int(K)]
    return np.sort(thetas[order]), len(thetas) < K


def mse_frequency(thetas_est, theta_true) -> float:
    """Mean squared circular frequency error after optimal matching.

    Components are paired by minimum total squared circular distance. True
    frequencies left unmatched (fewer estimates than sources) are each charged
    :data:`MISSING_PENALTY`, the worst case on the unit circle.
    """
    est = np.atleast_1d(np.asarray(thetas_est, dtype=float))
    true = np.atleast_1d(np.asarray(theta_true, dtype=float))
    K = len(true)
    if K == 0:
        raise ValueError("need at least one true frequency")
    total = 0.0
    if len(est):
        cost = circular_distance(true[:, None], est[None, :]) ** 2
        rows, cols = scipy.optimize.linear_sum_assignment(cost)
        total = float(cost[rows, cols].sum())
        missing = K - len(rows)
    else:
        missing = K
    return (total + missing * MISSING_PENALTY) / K


def grid_lower_bound(offset_fraction: float, N_tilde: int) -> float:
    """Squared error floor of an on-grid estimator for a source offset from the grid.

    A source ``offset_fraction`` of a grid step away from its nearest grid
    point cannot be located better than ``(offset_fraction / N_tilde)^2``,
    whatever the SNR.
    """
    if not 0.0 <= offset_fraction <= 0.5:
        raise ValueError("offset_fraction must lie in [0, 0.5]")
    if N_tilde < 1:
        raise ValueError("grid size must be positive")
    return (offset_fraction / N_tilde) ** 2


# ---------------------------------------------------------------- CRLB


class FisherSingularError(ValueError):
    """The Fisher information is singular; ``direction`` spans its null space."""

    def __init__(self, message: str, direction: dict):
        super().__init__(message)
        self.direction = direction


def _parameter_names(K: int, L: int, mode: str) -> list[str]:
    names = [f"theta[{k}]" for k in range(K)] + [f"p[{k}]" for k in range(K)]
    if mode == "equal":
        return names + ["sigma"]
    return names + [f"sigma[{l}]" for l in range(L)]


def covariance_derivatives(scene: SourceScene, geom: ArrayGeometry, mode: str) -> list[np.ndarray]:
    """``dR/d(theta, p, sigma)`` for ``R = A diag(p) A^H + diag(sigma)``."""
    geom = check_geometry(geom)
    mode = check_mode(mode)
    thetas = np.asarray(scene.thetas)
    powers = np.asarray(scene.powers)
    A = steering_matrix(geom, thetas)
    dA = 2j * np.pi * geom.positions[:, None] * A
    L = geom.L
    out = []
    for k in range(len(thetas)):
        G = powers[k] * np.outer(dA[:, k], A[:, k].conj())
        out.append(G + G.conj().T)
    for k in range(len(thetas)):
        out.append(np.outer(A[:, k], A[:, k].conj()))
    if mode == "equal":
        out.append(np.eye(L, dtype=complex))
    else:
        for l in range(L):
            E = np.zeros((L, L), dtype=complex)
            E[l, l] = 1.0
            out.append(E)
    return out


def fisher_information(scene: SourceScene, geom, sigma, N: float, mode: str = "equal",
                       derivatives: list[np.ndarray] | None = None) -> np.ndarray:
    """``F_ij = N tr(R^-1 dR_i R^-1 dR_j)`` for the stochastic Gaussian model.

    ``derivatives`` may be supplied to use something other than the exact
    derivatives (for example finite differences).
    """
    geom = check_geometry(geom)
    mode = check_mode(mode)
    if scene.is_coherent:
        raise ValueError("the stochastic CRLB here assumes uncorrelated sources")
    if N < 1:
        raise ValueError("N must be at least 1")
    s = NoiseSpec(sigma).vector(geom.L)
    if np.any(s <= 0):
        raise ValueError("noise variances must be positive")
    A = steering_matrix(geom, scene.thetas)
    R = (A * np.asarray(scene.powers)) @ A.conj().T + np.diag(s)
    D = derivatives if derivatives is not None else covariance_derivatives(scene, geom, mode)
    W = [np.linalg.solve(R, Di) for Di in D]
    n = len(W)
    F = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            F[i, j] = F[j, i] = N * np.einsum("ab,ba->", W[i], W[j]).real
    return F


def crlb_stochastic(scene: SourceScene, geom, sigma, N: float, mode: str = "equal") -> np.ndarray:
    """Per-source frequency CRLB under the stochastic (unconditional) model.

    ``mode="equal"`` assumes the noise variances are known to be equal (one
    unknown variance); ``mode="distinct"`` estimates one variance per sensor.
    The bound on the mean of the squared errors is ``crlb.mean()``.

    Raises:
        FisherSingularError: if the scene is not identifiable.
    """
    geom = check_geometry(geom)
    mode = check_mode(mode)
    F = fisher_information(scene, geom, sigma, N, mode)
    w, V = np.linalg.eigh(F)
    if w[0] <= 1e-12 * max(w[-1], 1e-300):
        names = _parameter_names(scene.K, geom.L, mode)
        v = V[:, 0]
        direction = {nm: float(c) for nm, c in zip(names, v) if abs(c) > 1e-3}
        raise FisherSingularError(
            "Fisher information is singular along " + ", ".join(f"{c:+.3g}*{nm}" for nm, c in direction.items()),
            direction,
        )
    Finv = (V / w) @ V.T
    return np.diag(Finv)[: scene.K].copy()
