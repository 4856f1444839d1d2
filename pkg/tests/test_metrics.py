import itertools

import numpy as np
import pytest

from gridless_doa import (
    ArrayGeometry,
    ParamEstimate,
    SourceScene,
    TrialResult,
    crlb_stochastic,
    fisher_information,
    grid_lower_bound,
    mse_frequency,
    snr_to_sigma,
    steering_matrix,
    top_k,
)
from gridless_doa.array_model import circular_distance
from gridless_doa.metrics import MISSING_PENALTY, FisherSingularError, covariance_derivatives

EXP3_GEOM = ArrayGeometry([1, 2, 5, 7])
EXP3 = SourceScene([0.1008, 0.1809, 0.4001, 0.5509, 0.7006, 0.8501], [2, 2, 2, 1, 1, 1])


def _finite_difference_derivatives(scene, geom, sigma, mode, h=1e-6):
    L, K = geom.L, scene.K
    s = np.full(L, sigma) if np.ndim(sigma) == 0 else np.asarray(sigma, float)

    def cov(thetas, powers, s):
        A = steering_matrix(geom, np.mod(thetas, 1.0))
        return (A * powers) @ A.conj().T + np.diag(s)

    t0, p0 = np.array(scene.thetas), np.array(scene.powers)
    out = []
    for k in range(K):
        e = np.zeros(K)
        e[k] = h
        out.append((cov(t0 + e, p0, s) - cov(t0 - e, p0, s)) / (2 * h))
    for k in range(K):
        e = np.zeros(K)
        e[k] = h * p0[k]
        out.append((cov(t0, p0 + e, s) - cov(t0, p0 - e, s)) / (2 * e[k]))
    if mode == "equal":
        d = h * s[0]
        out.append((cov(t0, p0, s + d) - cov(t0, p0, s - d)) / (2 * d))
    else:
        for l in range(L):
            e = np.zeros(L)
            e[l] = h * s[l]
            out.append((cov(t0, p0, s + e) - cov(t0, p0, s - e)) / (2 * e[l]))
    return out


# ---------------------------------------------------------------- top-K and MSE


def test_top_k_examples():
    est = ParamEstimate(np.array([0.1, 0.2, 0.3]), np.array([5.0, 1.0, 3.0]), np.zeros(1))
    thetas, short = top_k(est, 2)
    np.testing.assert_allclose(thetas, [0.1, 0.3])
    assert not short
    thetas, short = top_k(est, 3)
    np.testing.assert_allclose(thetas, est.thetas)
    thetas, short = top_k(est, 5)
    assert short and len(thetas) == 3


def test_top_k_matches_sort_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        r = int(rng.integers(1, 10))
        est = ParamEstimate(np.sort(rng.random(r)), rng.random(r), np.zeros(1))
        K = int(rng.integers(1, r + 1))
        order = sorted(range(r), key=lambda i: -est.powers[i])[:K]
        np.testing.assert_array_equal(top_k(est, K)[0], np.sort(est.thetas[order]))


def test_mse_examples():
    assert mse_frequency([0.1, 0.4], [0.1, 0.4]) == 0.0
    assert mse_frequency([0.3], [0.2]) == pytest.approx(0.01)
    assert mse_frequency([0.98], [0.01]) == pytest.approx(0.03**2)


def test_mse_missing_component_penalty():
    assert mse_frequency([], [0.2, 0.5]) == pytest.approx(MISSING_PENALTY)
    assert mse_frequency([0.2], [0.2, 0.5]) == pytest.approx(MISSING_PENALTY / 2)


@pytest.mark.parametrize("K", [1, 2, 3, 4])
def test_mse_matches_exhaustive_permutation_oracle(K):
    rng = np.random.default_rng(K)
    for _ in range(20):
        true, est = rng.random(K), rng.random(K)
        best = min(np.mean(circular_distance(est[list(perm)], true) ** 2)
                   for perm in itertools.permutations(range(K)))
        assert mse_frequency(est, true) == pytest.approx(best, abs=1e-15)
        assert mse_frequency(rng.permutation(est), true) == pytest.approx(best, abs=1e-15)


def test_grid_lower_bound():
    assert grid_lower_bound(1 / 3, 1000) == pytest.approx(1 / 9e6)
    assert grid_lower_bound(0.0, 77) == 0.0
    assert grid_lower_bound(1 / 3, 200) == pytest.approx(1 / (9 * 4e4))
    with pytest.raises(ValueError):
        grid_lower_bound(0.6, 10)


def test_trial_result_row_and_validation():
    tr = TrialResult("spa", 3, 10.0, 200, 1e-6, 0.1, thetas=np.array([0.2]))
    assert tr.row() == {"method": "spa", "seed": 3, "snr_db": 10.0, "N": 200, "mse": 1e-6,
                        "runtime_s": 0.1, "converged": True}
    with pytest.raises(ValueError):
        TrialResult("spa", 3, 10.0, 200, -1.0, 0.1)


# ---------------------------------------------------------------- CRLB


@pytest.mark.parametrize("mode", ["equal", "distinct"])
def test_fisher_matches_finite_differences(mode):
    sigma = snr_to_sigma(1.0, 10.0)
    exact = fisher_information(EXP3, EXP3_GEOM, sigma, 200, mode)
    fd = fisher_information(EXP3, EXP3_GEOM, sigma, 200, mode,
                            derivatives=_finite_difference_derivatives(EXP3, EXP3_GEOM, sigma, mode))
    np.testing.assert_allclose(fd, exact, rtol=1e-4, atol=1e-4 * np.abs(exact).max())
    c_exact = np.diag(np.linalg.inv(exact))[: EXP3.K]
    c_fd = np.diag(np.linalg.inv(fd))[: EXP3.K]
    np.testing.assert_allclose(c_fd, c_exact, rtol=1e-4)


def test_crlb_scales_inversely_with_n():
    sigma = snr_to_sigma(1.0, 10.0)
    a = crlb_stochastic(EXP3, EXP3_GEOM, sigma, 200)
    b = crlb_stochastic(EXP3, EXP3_GEOM, sigma, 400)
    np.testing.assert_allclose(b, a / 2, rtol=1e-10)


def test_crlb_decreases_with_snr():
    g = ArrayGeometry.ula(10)
    scene = SourceScene([1 / 6, 4 / 15], [1.0, 1.0])
    for mode in ("equal", "distinct"):
        values = [crlb_stochastic(scene, g, snr_to_sigma(1.0, s), 200, mode).mean() for s in range(-20, 41, 5)]
        assert np.all(np.diff(values) < 0)


def test_crlb_single_tone_closed_form():
    M, N, p, sigma, theta = 8, 100, 2.0, 0.5, 0.3
    scene = SourceScene([theta], [p])
    got = crlb_stochastic(scene, ArrayGeometry.ula(M), sigma, N)[0]
    # stochastic CRLB for one tone on an M-sensor ULA, in frequency units
    expected = 6 * sigma * (sigma + M * p) / (N * p**2 * M**2 * (M**2 - 1)) / (2 * np.pi) ** 2
    assert got == pytest.approx(expected, rel=1e-10)


def test_equal_noise_knowledge_lowers_the_bound():
    sigma = snr_to_sigma(1.0, 10.0)
    eq = crlb_stochastic(EXP3, EXP3_GEOM, sigma, 200, "equal").mean()
    di = crlb_stochastic(EXP3, EXP3_GEOM, sigma, 200, "distinct").mean()
    assert eq <= di


def test_singular_fisher_names_direction():
    scene = SourceScene([0.2, 0.2], [1.0, 1.0])
    with pytest.raises(FisherSingularError) as info:
        crlb_stochastic(scene, ArrayGeometry.ula(4), 1.0, 10)
    assert any(name.startswith("theta") or name.startswith("p") for name in info.value.direction)


def test_covariance_derivative_count():
    assert len(covariance_derivatives(EXP3, EXP3_GEOM, "equal")) == 2 * 6 + 1
    assert len(covariance_derivatives(EXP3, EXP3_GEOM, "distinct")) == 2 * 6 + 4
