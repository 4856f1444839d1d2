"""Linear-array geometry: steering vectors, selection matrices and coarrays.

Sensor positions are integer multiples of half a wavelength. An array is
described by its sorted sensor index set ``omega`` (1-based, first index 1);
a uniform linear array (ULA) of ``M`` sensors is ``omega = [1, ..., M]`` and a
sparse linear array (SLA) is any subset of it containing both ends.

Frequencies ``theta`` live in ``[0, 1)`` and relate to the direction ``d`` by
``theta = (sin(d) + 1) / 2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Sensor index set of a (sparse) linear array.

    Indices are renormalized on construction so that the first sensor sits at
    index 1; the indices as passed in are kept in ``original_omega``.

    Attributes:
        omega: Strictly increasing sensor indices with ``omega[0] == 1``.
        original_omega: Indices as given by the caller.
    """

    omega: tuple[int, ...]
    original_omega: tuple[int, ...] = field(default=(), compare=False)

    def __init__(self, omega: Iterable[int]):
        raw = [int(o) for o in omega]
        if len(raw) == 0:
            raise ValueError("an array needs at least one sensor")
        if any(b <= a for a, b in zip(raw, raw[1:])):
            raise ValueError(f"sensor indices must be strictly increasing, got {raw}")
        shifted = tuple(o - raw[0] + 1 for o in raw)
        object.__setattr__(self, "omega", shifted)
        object.__setattr__(self, "original_omega", tuple(raw))

    @classmethod
    def ula(cls, M: int) -> "ArrayGeometry":
        if M < 1:
            raise ValueError("M must be positive")
        return cls(range(1, M + 1))

    @property
    def L(self) -> int:
        """Number of physical sensors."""
        return len(self.omega)

    @property
    def M(self) -> int:
        """Aperture: number of sensors of the enclosing ULA."""
        return self.omega[-1]

    @property
    def is_ula(self) -> bool:
        return self.L == self.M

    @property
    def positions(self) -> np.ndarray:
        """Zero-based sensor positions ``omega - 1``."""
        return np.asarray(self.omega, dtype=float) - 1.0

    def to_dict(self) -> dict:
        return {"omega": list(self.original_omega)}

    @classmethod
    def from_dict(cls, record: dict) -> "ArrayGeometry":
        if "omega" in record:
            return cls(record["omega"])
        if "M" in record:
            return cls.ula(int(record["M"]))
        raise ValueError("geometry record needs an 'omega' (or 'M') field")

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ArrayGeometry":
        return cls.from_dict(json.loads(text))

    def __repr__(self) -> str:
        return f"ArrayGeometry(omega={list(self.omega)})"


def _check_thetas(thetas: np.ndarray) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    if np.any(~np.isfinite(thetas)) or np.any(thetas < 0.0) or np.any(thetas >= 1.0):
        raise ValueError("frequencies must lie in [0, 1); wrap them modulo 1 first")
    return thetas


def steering_vector(geom: ArrayGeometry, theta: float) -> np.ndarray:
    """Return ``exp(i 2 pi (omega_j - 1) theta)`` for every sensor."""
    return steering_matrix(geom, [theta])[:, 0]


def steering_matrix(geom: ArrayGeometry, thetas: Sequence[float]) -> np.ndarray:
    """Array manifold matrix with one steering vector per column (L x K)."""
    thetas = _check_thetas(np.atleast_1d(thetas))
    return _manifold(geom.positions, thetas)


def _manifold(positions: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    # exact reduction of the phase keeps unit modulus at large positions
    phase = np.mod(np.outer(positions, thetas), 1.0)
    return np.exp(2j * np.pi * phase)


def selection_matrix(geom: ArrayGeometry) -> np.ndarray:
    """Binary L x M matrix picking the physical sensors out of the full ULA."""
    gamma = np.zeros((geom.L, geom.M))
    gamma[np.arange(geom.L), np.asarray(geom.omega) - 1] = 1.0
    return gamma


def coarray(geom: ArrayGeometry) -> list[int]:
    """Sorted set ``{m1 - m2 + 1 : m1 >= m2}`` of observable covariance lags (1-based)."""
    om = np.asarray(geom.omega)
    diffs = om[:, None] - om[None, :]
    return sorted(set((diffs[diffs >= 0] + 1).tolist()))


def is_redundancy_array(geom: ArrayGeometry) -> bool:
    """True when the coarray covers every lag ``1..M``."""
    return len(coarray(geom)) == geom.M


def max_detectable_sources(geom: ArrayGeometry) -> int:
    """Source-count bound used throughout: ``M - 1``.

    For non-redundancy arrays the true bound is smaller; the estimators here
    still work under the ``M - 1`` assumption.
    """
    return geom.M - 1


def direction_to_frequency(d: np.ndarray | float, degrees: bool = True) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if degrees:
        d = np.deg2rad(d)
    return (np.sin(d) + 1.0) / 2.0


def frequency_to_direction(theta: np.ndarray | float, degrees: bool = True) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    d = np.arcsin(np.clip(2.0 * theta - 1.0, -1.0, 1.0))
    return np.rad2deg(d) if degrees else d


def circular_distance(a: np.ndarray | float, b: np.ndarray | float) -> np.ndarray:
    """Distance on the unit circle ``[0, 1)``: ``min(|a - b|, 1 - |a - b|)``."""
    diff = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 1.0)
    return np.minimum(diff, 1.0 - diff)
