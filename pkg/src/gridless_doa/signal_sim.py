"""Synthetic snapshots for farfield narrowband sources plus sample statistics.

Random numbers come from numpy's counter-based Philox generator seeded with an
explicit 64-bit integer, so any seed reproduces its snapshots bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .array_model import ArrayGeometry, steering_matrix

SOURCE_MODELS = ("constant-modulus", "gaussian")


@dataclass(frozen=True)
class SourceScene:
    """Source frequencies, powers and (optional) coherent replicas.

    Attributes:
        thetas: Source frequencies in ``[0, 1)``.
        powers: Linear source powers, strictly positive.
        coherence: ``(k, base)`` pairs declaring source ``k`` an exact copy of
            source ``base`` (same waveform, rescaled to ``powers[k]``).
        source_model: ``"constant-modulus"`` (unit modulus, uniform random
            phase) or ``"gaussian"`` (circular complex normal).
    """

    thetas: tuple[float, ...]
    powers: tuple[float, ...]
    coherence: tuple[tuple[int, int], ...] = ()
    source_model: str = "gaussian"

    def __post_init__(self):
        thetas = tuple(float(t) for t in np.atleast_1d(self.thetas))
        powers = tuple(float(p) for p in np.atleast_1d(self.powers))
        coherence = tuple((int(k), int(b)) for k, b in self.coherence)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "coherence", coherence)
        K = len(thetas)
        if K == 0:
            raise ValueError("a scene needs at least one source")
        if len(powers) != K:
            raise ValueError(f"got {K} frequencies but {len(powers)} powers")
        if any(not 0.0 <= t < 1.0 for t in thetas):
            raise ValueError("source frequencies must lie in [0, 1)")
        if any(p <= 0.0 for p in powers):
            raise ValueError("source powers must be strictly positive")
        for k, base in coherence:
            if not (0 <= k < K and 0 <= base < K) or k == base:
                raise ValueError(f"invalid coherence pair ({k}, {base})")
        replicas = [k for k, _ in coherence]
        if len(set(replicas)) != len(replicas):
            raise ValueError("a source can replicate only one other source")
        if set(replicas) & {b for _, b in coherence}:
            raise ValueError("a replica cannot itself be replicated")
        if self.source_model not in SOURCE_MODELS:
            raise ValueError(f"source_model must be one of {SOURCE_MODELS}")

    @property
    def K(self) -> int:
        return len(self.thetas)

    @property
    def is_coherent(self) -> bool:
        return len(self.coherence) > 0


@dataclass(frozen=True)
class NoiseSpec:
    """Noise variances: a scalar (equal variances) or one value per sensor."""

    variances: float | tuple[float, ...] = field(default=0.0)

    def __post_init__(self):
        v = np.asarray(self.variances, dtype=float)
        if np.any(v < 0) or np.any(~np.isfinite(v)):
            raise ValueError("noise variances must be finite and nonnegative")
        if v.ndim > 1:
            raise ValueError("noise variances must be a scalar or a vector")
        object.__setattr__(self, "variances", float(v) if v.ndim == 0 else tuple(v.tolist()))

    @property
    def is_equal(self) -> bool:
        return np.ndim(self.variances) == 0

    def vector(self, L: int) -> np.ndarray:
        """Per-sensor variance vector of length ``L``."""
        if self.is_equal:
            return np.full(L, self.variances)
        v = np.asarray(self.variances)
        if v.size != L:
            raise ValueError(f"noise vector has {v.size} entries but the array has {L} sensors")
        return v


def make_rng(seed: int) -> np.random.Generator:
    """Philox generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _circular_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_source_signals(scene: SourceScene, N: int, rng: np.random.Generator) -> np.ndarray:
    """K x N source waveforms with the declared powers and replicas."""
    K = scene.K
    p = np.asarray(scene.powers)
    if scene.source_model == "constant-modulus":
        unit = np.exp(2j * np.pi * rng.random((K, N)))
    else:
        unit = _circular_normal(rng, (K, N))
    S = np.sqrt(p)[:, None] * unit
    for k, base in scene.coherence:
        S[k] = S[base] * np.sqrt(p[k] / p[base])
    return S


def generate_snapshots(
    scene: SourceScene,
    geom: ArrayGeometry,
    noise: NoiseSpec,
    N: int,
    seed: int,
) -> np.ndarray:
    """Draw ``Y = A(theta) S + E`` (L x N) deterministically from ``seed``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    sigma = noise.vector(geom.L)
    rng = make_rng(seed)
    S = generate_source_signals(scene, N, rng)
    E = np.sqrt(sigma)[:, None] * _circular_normal(rng, (geom.L, N))
    return steering_matrix(geom, scene.thetas) @ S + E


def sample_covariance(Y: np.ndarray) -> np.ndarray:
    """``(1/N) Y Y^H``, symmetrized so the result is exactly Hermitian."""
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    R = (Y @ Y.conj().T) / Y.shape[1]
    return (R + R.conj().T) / 2.0


def true_covariance(scene: SourceScene, geom: ArrayGeometry, noise: NoiseSpec) -> np.ndarray:
    """``A diag(p) A^H + diag(sigma)`` for an uncorrelated scene."""
    if scene.is_coherent:
        raise NotImplementedError("the closed-form covariance assumes uncorrelated sources")
    A = steering_matrix(geom, scene.thetas)
    R = (A * np.asarray(scene.powers)) @ A.conj().T + np.diag(noise.vector(geom.L))
    return (R + R.conj().T) / 2.0


def snr_to_sigma(p_min: float, snr_db: float) -> float:
    """Noise variance giving ``snr_db`` relative to the weakest source."""
    if p_min <= 0:
        raise ValueError("p_min must be positive")
    return float(p_min) * 10.0 ** (-float(snr_db) / 10.0)
