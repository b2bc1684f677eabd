import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tisa.errors import ShapeError
from tisa.toeplitz import (
    diagonal_profile,
    embedding_toeplitzness,
    toeplitz_from_profile,
    toeplitzness,
)

from conftest import brute_force_toeplitz


def test_brute_force_oracle_on_worked_example():
    rss, tss, r2 = brute_force_toeplitz([[1.0, 2.0], [3.0, 4.0]])
    assert (rss, tss) == (4.5, 5.0)
    assert r2 == pytest.approx(0.1, abs=1e-15)


def test_profile_examples(kernels_backend):
    assert diagonal_profile([[1, 2], [3, 4]]).tolist() == [3.0, 2.5, 2.0]
    assert diagonal_profile([[7]]).tolist() == [7.0]
    gen = np.array([5.0, -1.0, 0.5, 2.0, 9.0])
    assert np.array_equal(diagonal_profile(toeplitz_from_profile(gen)), gen)


def test_worked_example(kernels_backend):
    fit = toeplitzness([[1, 2], [3, 4]])
    assert fit.rss == 4.5
    assert fit.tss == 5.0
    assert fit.r2 == pytest.approx(0.1, abs=1e-15)
    assert fit.fitted.tolist() == [[2.5, 2.0], [3.0, 2.5]]


def test_exact_toeplitz_and_constant(rng):
    fit = toeplitzness(toeplitz_from_profile(rng.standard_normal(9)))
    assert fit.rss == 0.0 and fit.r2 == 1.0
    const = toeplitzness(np.full((4, 4), 3.25))
    assert const.tss == 0.0 and const.r2 == 1.0


def test_non_square_rejected():
    with pytest.raises(ShapeError):
        toeplitzness(np.ones((2, 3)))
    with pytest.raises(ShapeError):
        diagonal_profile(np.ones((3, 1)))


def test_fitted_matrix_is_exactly_toeplitz(rng):
    fit = toeplitzness(rng.standard_normal((6, 6)))
    n = 6
    for i in range(n):
        for j in range(n):
            assert fit.fitted[i, j] == fit.profile[j - i + n - 1]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 32), st.integers(0, 2**32 - 1))
def test_r2_bounds_and_brute_force_agreement(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    fit = toeplitzness(a)
    assert 0.0 <= fit.r2 <= 1.0
    assert fit.rss <= fit.tss or fit.tss == 0.0
    if n <= 12:
        rss, tss, r2 = brute_force_toeplitz(a.tolist())
        assert abs(fit.r2 - r2) <= 1e-12


def test_fit_is_idempotent(rng):
    fit = toeplitzness(rng.standard_normal((10, 10)))
    again = toeplitzness(fit.fitted)
    # averaging equal entries may drift by an ulp, nothing more
    assert again.rss < 1e-26
    assert np.allclose(again.profile, fit.profile, rtol=0, atol=1e-15)


def test_per_diagonal_mean_is_locally_optimal(rng):
    a = rng.standard_normal((8, 8))
    fit = toeplitzness(a)
    for _ in range(20):
        perturbed = fit.profile + rng.choice([-1e-3, 1e-3], size=fit.profile.size)
        rss = np.sum((a - toeplitz_from_profile(perturbed)) ** 2)
        assert rss > fit.rss


def test_r2_invariant_to_constant_shift(rng):
    a = rng.standard_normal((12, 12))
    assert toeplitzness(a + 17.0).r2 == pytest.approx(toeplitzness(a).r2, abs=1e-12)


def test_embedding_variants(rng):
    # Rotating 2-D embeddings have an exactly Toeplitz Gram matrix (up to rounding).
    angles = 0.3 * np.arange(20)
    e_p = np.stack([np.cos(angles), np.sin(angles)], axis=1) * 2.0
    assert embedding_toeplitzness(e_p).r2 == pytest.approx(1.0, abs=1e-12)
    assert embedding_toeplitzness(e_p, cosine=True).r2 == pytest.approx(1.0, abs=1e-12)
    noise = rng.standard_normal((20, 8))
    assert embedding_toeplitzness(noise).r2 < 0.9
