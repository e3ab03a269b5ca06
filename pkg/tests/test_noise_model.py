import numpy as np
import pytest

from errors import NoiseParamError, RangeError
from noise_model import SynthesisMode, noise_params, pg_variance, sample_mixture, synthesize


def test_variance_literal_example():
    p = noise_params(0.1, 0.02)
    assert pg_variance(0.5, p, SynthesisMode.LITERAL) == pytest.approx(0.0054)


def test_variance_at_zero_is_gaussian_only():
    p = noise_params(0.3, 0.02)
    assert pg_variance(0.0, p, SynthesisMode.LITERAL) == pytest.approx(0.0004)
    assert pg_variance(0.0, p, SynthesisMode.MEAN_PRESERVING) == pytest.approx(0.0004)


def test_variance_mean_preserving_is_linear_in_alpha():
    p = noise_params(0.01, 0.0)
    assert pg_variance(0.5, p, SynthesisMode.MEAN_PRESERVING) == pytest.approx(0.005)


def test_variance_vectorized():
    out = pg_variance(np.array([0.0, 1.0]), noise_params(0.1, 0.0), SynthesisMode.LITERAL)
    np.testing.assert_allclose(out, [0.0, 0.01])


@pytest.mark.parametrize('alpha, sigma', [(0.0, 0.02), (-0.1, 0.0), (0.1, -0.01), (float('nan'), 0.0)])
def test_invalid_parameters_rejected(alpha, sigma):
    with pytest.raises(NoiseParamError):
        noise_params(alpha, sigma)


def test_intensity_outside_unit_range_rejected():
    with pytest.raises(RangeError):
        pg_variance(1.5, noise_params(0.1, 0.0))
    with pytest.raises(RangeError):
        synthesize(np.full((4, 4), -0.1), noise_params(0.1, 0.0))


@pytest.mark.slow
def test_zero_image_gives_gaussian_field():
    y = synthesize(np.zeros((1000, 1000)), noise_params(0.05, 0.02), seed=3, clip=False).data
    standard_error = 0.02 / np.sqrt(2 * y.size)
    assert abs(y.std() - 0.02) <= 3 * standard_error


@pytest.mark.slow
def test_mean_preserving_variance_monte_carlo():
    p = noise_params(0.01, 0.0002)
    y = synthesize(np.full((1000, 1000), 0.5), p, SynthesisMode.MEAN_PRESERVING, seed=5, clip=False).data
    assert y.var() == pytest.approx(0.005 + 4e-8, rel=0.02)
    assert y.mean() == pytest.approx(0.5, abs=1e-3)


@pytest.mark.slow
def test_literal_variance_monte_carlo():
    p = noise_params(1.0, 0.0)
    y = synthesize(np.full((1000, 1000), 0.5), p, SynthesisMode.LITERAL, seed=9, clip=False).data
    assert y.var() == pytest.approx(0.5, rel=0.02)


def test_clipping_keeps_unit_range():
    y = synthesize(np.full((64, 64), 0.95), noise_params(0.05, 0.05), seed=1).data
    assert y.min() >= 0.0 and y.max() <= 1.0


def test_synthesis_is_reproducible_per_seed():
    clean = np.full((16, 16), 0.4)
    p = noise_params(0.02, 0.01)
    first = synthesize(clean, p, seed=11).data
    again = synthesize(clean, p, seed=11).data
    other = synthesize(clean, p, seed=12).data
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)


def test_mixture_default_ranges():
    draws = sample_mixture(count=500, seed=2)
    alphas = np.array([p.alpha for p in draws])
    sigmas = np.array([p.sigma for p in draws])
    assert alphas.min() >= 1e-6 and alphas.max() <= 0.0256
    assert sigmas.min() >= 0.0 and sigmas.max() <= 0.06


def test_mixture_empty_count():
    assert sample_mixture(count=0) == []


def test_mixture_is_deterministic():
    assert sample_mixture(count=5, seed=4) == sample_mixture(count=5, seed=4)


def test_mixture_degenerate_range_rejected():
    with pytest.raises(RangeError):
        sample_mixture(((0.01, 0.01), (0.0, 0.05)), count=3)
    with pytest.raises(RangeError):
        sample_mixture(((0.0, 0.01), (0.05, 0.0)), count=3)


def test_literal_mean_is_scaled_intensity():
    p = noise_params(0.5, 0.01)
    y = synthesize(np.full((500, 500), 0.4), p, SynthesisMode.LITERAL, seed=21, clip=False).data
    standard_error = np.sqrt(pg_variance(0.4, p, SynthesisMode.LITERAL) / y.size)
    assert abs(y.mean() - 0.5 * 0.4) <= 3 * standard_error
