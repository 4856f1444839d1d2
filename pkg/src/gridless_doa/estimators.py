"""scikit-learn style wrappers around the functional API.

``fit(X)`` takes snapshots in the usual sample-major layout, shape
``(n_snapshots, n_sensors)``; the functional API uses the transposed
``L x N`` layout. Hyperparameters are stored unchanged by ``__init__`` so that
``get_params``/``set_params``/``clone`` behave as for any sklearn estimator;
fitted quantities carry a trailing underscore.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_geometry, check_mode, check_snapshots
from .baselines import Grid, iaa, music, peak_pick, spice, spice_pp
from .signal_sim import sample_covariance
from .spa import estimate_from_fit, fit_covariance, fit_single_snapshot


def _check_X(X, geometry):
    """Validate ``X`` and return ``(Y, geom)`` with ``Y`` in ``L x N`` layout."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D (n_snapshots, n_sensors), got shape {X.shape}")
    geom = check_geometry(X.shape[1] if geometry is None else geometry)
    return check_snapshots(X.T, geom.L), geom


def _check_fitted(est, attr: str):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class _PointEstimatorMixin:
    def get_estimate(self):
        _check_fitted(self, "estimate_")
        return self.estimate_

    def _store(self, est):
        self.estimate_ = est
        self.thetas_ = est.thetas
        self.powers_ = est.powers
        self.sigma_ = est.sigma
        self.n_components_ = est.r


class SPA(_PointEstimatorMixin, BaseEstimator):
    """Gridless sparse and parametric DOA estimator.

    Args:
        geometry: Sensor indices, an ``ArrayGeometry``, or None for a ULA
            with as many sensors as ``X`` has columns.
        mode: ``"equal"`` or ``"distinct"`` noise variances.
        criterion: ``"auto"``, ``"f1"`` or ``"f2"``.
        rank_tol: Relative eigenvalue threshold for the decomposition rank.

    Attributes:
        thetas_: Estimated frequencies, ascending.
        powers_: Matching source powers.
        sigma_: Noise variance per sensor.
        covariance_: Fitted covariance ``R_hat``.
        estimate_: The full ``ParamEstimate`` including solver diagnostics.
    """

    def __init__(self, geometry=None, mode="equal", criterion="auto", rank_tol=1e-8):
        self.geometry = geometry
        self.mode = mode
        self.criterion = criterion
        self.rank_tol = rank_tol

    def fit(self, X, y=None):
        Y, geom = _check_X(X, self.geometry)
        mode = check_mode(self.mode)
        if Y.shape[1] == 1:
            fit = fit_single_snapshot(Y, geom, mode)
        else:
            fit = fit_covariance(sample_covariance(Y), geom, Y.shape[1], mode, self.criterion)
        self._store(estimate_from_fit(fit, self.rank_tol))
        self.covariance_ = fit.R_hat
        self.n_features_in_ = geom.L
        return self


class SPICE(BaseEstimator):
    """Grid-based SPICE; ``thetas_`` holds the ``n_sources`` largest peaks.

    Attributes:
        spectrum_: ``Spectrum`` of grid powers.
        powers_: Grid powers (same as ``spectrum_.values``).
        sigma_: Noise variance per sensor.
        covariance_: Fitted covariance.
        converged_, n_iter_: Iteration diagnostics.
        thetas_: Peak locations, only when ``n_sources`` is set.
    """

    def __init__(self, geometry=None, grid_size=500, mode="equal", n_sources=None, max_iter=500, tol=1e-6):
        self.geometry = geometry
        self.grid_size = grid_size
        self.mode = mode
        self.n_sources = n_sources
        self.max_iter = max_iter
        self.tol = tol

    def _run(self, X):
        Y, geom = _check_X(X, self.geometry)
        res = spice(sample_covariance(Y), geom, Y.shape[1], Grid(self.grid_size), check_mode(self.mode),
                    max_iter=self.max_iter, tol=self.tol)
        self.result_ = res
        self.spectrum_ = res.spectrum
        self.powers_ = res.powers
        self.sigma_ = res.sigma
        self.covariance_ = res.R_hat
        self.converged_ = res.converged
        self.n_iter_ = res.iterations
        self.n_features_in_ = geom.L
        return res

    def fit(self, X, y=None):
        res = self._run(X)
        if self.n_sources is not None:
            self.thetas_, self.short_ = peak_pick(res.spectrum, self.n_sources)
        return self


class SPICEPP(_PointEstimatorMixin, SPICE):
    """SPICE followed by postprocessing and Vandermonde decomposition (gridless output)."""

    def fit(self, X, y=None):
        res = self._run(X)
        self._store(spice_pp(res))
        self.powers_grid_ = res.powers
        return self


class MUSIC(BaseEstimator):
    """MUSIC pseudospectrum with peak picking."""

    def __init__(self, n_sources=1, geometry=None, grid_size=500):
        self.n_sources = n_sources
        self.geometry = geometry
        self.grid_size = grid_size

    def fit(self, X, y=None):
        Y, geom = _check_X(X, self.geometry)
        if Y.shape[1] < 2:
            raise ValueError("MUSIC needs at least two snapshots")
        self.spectrum_ = music(sample_covariance(Y), self.n_sources, geom, Grid(self.grid_size))
        self.thetas_, self.short_ = peak_pick(self.spectrum_, self.n_sources)
        self.n_features_in_ = geom.L
        return self


class IAA(BaseEstimator):
    """Iterative adaptive approach; ``thetas_`` is set when ``n_sources`` is."""

    def __init__(self, geometry=None, grid_size=500, n_sources=None, max_iter=500, tol=1e-6):
        self.geometry = geometry
        self.grid_size = grid_size
        self.n_sources = n_sources
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        Y, geom = _check_X(X, self.geometry)
        self.spectrum_ = iaa(Y, geom, Grid(self.grid_size), self.max_iter, self.tol)
        self.converged_ = self.spectrum_.diagnostics["converged"]
        self.n_iter_ = self.spectrum_.diagnostics["iterations"]
        if self.n_sources is not None:
            self.thetas_, self.short_ = peak_pick(self.spectrum_, self.n_sources)
        self.n_features_in_ = geom.L
        return self
