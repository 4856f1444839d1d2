import numpy as np
import pytest

from gridless_doa import circular_distance, toeplitz, toeplitz_param, vandermonde_decompose
from gridless_doa.spa import RetrievalError


def _random_components(rng, M, r, min_sep=1e-3):
    while True:
        thetas = np.sort(rng.random(r))
        gaps = np.diff(np.r_[thetas, thetas[0] + 1.0])
        if r == 1 or gaps.min() >= min_sep:
            return thetas, rng.uniform(0.1, 5.0, r)


def test_dc_component():
    thetas, powers = vandermonde_decompose(np.ones(6, dtype=complex))
    np.testing.assert_allclose(thetas, [0.0], atol=1e-12)
    np.testing.assert_allclose(powers, [1.0], atol=1e-12)


def test_fig2_scene_is_recovered_exactly():
    true_t, true_p = np.array([0.1014, 0.1532, 0.5077]), np.array([5.0, 5.0, 1.0])
    thetas, powers = vandermonde_decompose(toeplitz_param(true_t, true_p, 10))
    np.testing.assert_allclose(thetas, true_t, atol=1e-8)
    np.testing.assert_allclose(powers, true_p, rtol=1e-8)


def test_zero_and_trivial_inputs():
    t, p = vandermonde_decompose(np.zeros(5, dtype=complex))
    assert t.size == 0 and p.size == 0
    t, p = vandermonde_decompose(np.array([2.0 + 0j]))
    assert t.size == 0


@pytest.mark.parametrize("seed", range(40))
def test_round_trip_random_scenes(seed):
    rng = np.random.default_rng(seed)
    M = int(rng.integers(5, 17))
    r = int(rng.integers(1, M))
    thetas, powers = _random_components(rng, M, r)
    u = toeplitz_param(thetas, powers, M)
    est_t, est_p = vandermonde_decompose(u)
    assert len(est_t) == r
    assert circular_distance(est_t, thetas).max() <= 1e-6
    np.testing.assert_allclose(est_p, powers, rtol=1e-6)
    T = toeplitz(u)
    assert np.linalg.norm(T - toeplitz(toeplitz_param(est_t, est_p, M))) <= 1e-6 * np.linalg.norm(T)


def test_full_rank_input_is_capped_at_m_minus_one():
    rng = np.random.default_rng(1)
    M = 6
    u = toeplitz_param(rng.random(M - 1), rng.uniform(1, 2, M - 1), M)
    u[0] += 0.3  # noise floor: T is full rank
    thetas, powers = vandermonde_decompose(u)
    assert len(thetas) <= M - 1
    assert np.all(powers > 0)
    assert np.all(np.diff(thetas) > 0)


def test_outputs_sorted_and_positive():
    u = toeplitz_param([0.9, 0.1, 0.5], [1.0, 2.0, 3.0], 8)
    thetas, powers = vandermonde_decompose(u)
    np.testing.assert_allclose(thetas, [0.1, 0.5, 0.9], atol=1e-8)
    np.testing.assert_allclose(powers, [2.0, 3.0, 1.0], rtol=1e-8)


def test_tight_root_deviation_raises_retrieval_error():
    rng = np.random.default_rng(4)
    u = toeplitz_param(rng.random(3), [1.0, 1.0, 1.0], 6)
    u[1:] += 0.05 * (rng.standard_normal(5) + 1j * rng.standard_normal(5))
    u[0] += 1.0
    with pytest.raises(RetrievalError) as info:
        vandermonde_decompose(u, max_root_deviation=0.0)
    assert info.value.stage == "vandermonde_decompose"
