import numpy as np
import pytest

from gridless_doa import (
    ArrayGeometry,
    NoiseSpec,
    SourceScene,
    generate_snapshots,
    make_rng,
    sample_covariance,
    snr_to_sigma,
    true_covariance,
)
from gridless_doa.signal_sim import generate_source_signals

FIG2 = SourceScene([0.1014, 0.1532, 0.5077], [5, 5, 1])


def test_constant_modulus_noise_free_snapshot():
    scene = SourceScene([0.3], [1.0], source_model="constant-modulus")
    Y = generate_snapshots(scene, ArrayGeometry.ula(6), NoiseSpec(0.0), 1, seed=5)
    np.testing.assert_allclose(np.abs(Y), 1.0, atol=1e-14)


def test_same_seed_is_bit_identical():
    g = ArrayGeometry.ula(10)
    a = generate_snapshots(FIG2, g, NoiseSpec(0.5), 50, seed=11)
    b = generate_snapshots(FIG2, g, NoiseSpec(0.5), 50, seed=11)
    assert a.tobytes() == b.tobytes()
    c = generate_snapshots(FIG2, g, NoiseSpec(0.5), 50, seed=12)
    assert not np.array_equal(a, c)


def test_gaussian_source_covariance_converges():
    S = generate_source_signals(FIG2, 100_000, make_rng(0))
    C = S @ S.conj().T / S.shape[1]
    P = np.diag(FIG2.powers)
    assert np.linalg.norm(C - P) / np.linalg.norm(P) <= 0.05


def test_sample_covariance_converges_to_true():
    g = ArrayGeometry.ula(10)
    noise = NoiseSpec(1.0)
    Y = generate_snapshots(FIG2, g, noise, 100_000, seed=2)
    R = true_covariance(FIG2, g, noise)
    assert np.linalg.norm(sample_covariance(Y) - R) / np.linalg.norm(R) <= 0.05


def test_coherent_replica_shares_waveform():
    scene = SourceScene([0.1, 0.4, 0.7], [1.0, 2.0, 4.0], coherence=[(2, 0)])
    S = generate_source_signals(scene, 64, make_rng(1))
    np.testing.assert_allclose(S[2], 2.0 * S[0])


def test_sample_covariance_examples():
    y = np.array([1 + 2j, -1j, 3.0])
    np.testing.assert_allclose(sample_covariance(y), np.outer(y, y.conj()))
    np.testing.assert_allclose(sample_covariance(np.eye(2)), 0.5 * np.eye(2))


def test_sample_covariance_matches_loop_oracle():
    rng = np.random.default_rng(4)
    Y = rng.standard_normal((4, 7)) + 1j * rng.standard_normal((4, 7))
    R = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            for t in range(7):
                R[i, j] += Y[i, t] * np.conj(Y[j, t])
    np.testing.assert_allclose(sample_covariance(Y), R / 7, atol=1e-13)


def test_true_covariance_examples():
    R = true_covariance(SourceScene([0.0], [1.0]), ArrayGeometry.ula(3), NoiseSpec(0.0))
    np.testing.assert_allclose(R, np.ones((3, 3)))
    g = ArrayGeometry([1, 2, 5, 7])
    scene = SourceScene([0.12, 0.61], [2.0, 0.5])
    sig = np.array([0.1, 0.2, 0.3, 0.4])
    R = true_covariance(scene, g, NoiseSpec(sig))
    om = np.array(g.omega)
    for j in range(4):
        for l in range(4):
            expect = sum(p * np.exp(2j * np.pi * (om[j] - om[l]) * t) for t, p in zip(scene.thetas, scene.powers))
            expect += sig[j] * (j == l)
            assert R[j, l] == pytest.approx(expect, abs=1e-12)


def test_true_covariance_refuses_coherent_scene():
    scene = SourceScene([0.1, 0.4], [1.0, 1.0], coherence=[(1, 0)])
    with pytest.raises(NotImplementedError):
        true_covariance(scene, ArrayGeometry.ula(4), NoiseSpec(1.0))


def test_snr_to_sigma():
    assert snr_to_sigma(1, 0) == pytest.approx(1.0)
    assert snr_to_sigma(1, 10) == pytest.approx(0.1)
    assert snr_to_sigma(5, -20) == pytest.approx(500.0)
    with pytest.raises(ValueError):
        snr_to_sigma(0, 10)


@pytest.mark.parametrize("kwargs", [
    dict(thetas=[], powers=[]),
    dict(thetas=[0.1], powers=[0.0]),
    dict(thetas=[1.2], powers=[1.0]),
    dict(thetas=[0.1, 0.2], powers=[1.0]),
    dict(thetas=[0.1, 0.2], powers=[1.0, 1.0], coherence=[(1, 1)]),
    dict(thetas=[0.1], powers=[1.0], source_model="laplace"),
])
def test_scene_validation(kwargs):
    with pytest.raises(ValueError):
        SourceScene(**kwargs)


def test_noise_spec_validation_and_length():
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)
    with pytest.raises(ValueError):
        NoiseSpec([0.1, 0.2]).vector(3)
    np.testing.assert_array_equal(NoiseSpec(0.3).vector(2), [0.3, 0.3])
