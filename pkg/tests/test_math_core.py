import math

import numpy as np
import pytest

from pbgnet.errors import DimensionError, NumericError
from pbgnet.math_core import (
    TWO_OVER_SQRT_PI,
    RngStream,
    as_matrix,
    as_vector,
    check_finite,
    derive_seed,
    erf,
    erf_prime,
    gaussian_sample,
)


def test_erf_reference_values():
    assert erf(0.0) == 0.0
    assert abs(erf(1.0) - 0.8427007929497149) <= 1e-12
    assert abs(erf(1.0) - math.erf(1.0)) <= 1e-12


def test_erf_is_odd_and_increasing():
    x = np.random.default_rng(0).normal(scale=3.0, size=50)
    assert np.allclose(erf(-x), -erf(x), atol=1e-15, rtol=0)
    values = erf(np.sort(x))
    assert np.all(np.diff(values) > 0)
    assert np.all(np.abs(values) < 1)


def test_erf_prime_values():
    assert abs(erf_prime(0.0) - 1.1283791671) < 1e-10
    assert abs(erf_prime(2.0) - TWO_OVER_SQRT_PI * math.exp(-4.0)) < 1e-15
    x = np.random.default_rng(1).normal(scale=5.0, size=200)
    assert np.all(erf_prime(x) >= 0)
    assert np.all(erf_prime(x) <= TWO_OVER_SQRT_PI)


def test_erf_prime_matches_finite_differences():
    h = 1e-5
    for x in np.random.default_rng(2).uniform(-3, 3, size=20):
        numeric = (erf(x + h) - erf(x - h)) / (2 * h)
        assert abs(numeric - erf_prime(x)) <= 1e-6


def test_gaussian_sample_is_deterministic():
    first = gaussian_sample(RngStream(7), 5)
    second = gaussian_sample(RngStream(7), 5)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, gaussian_sample(RngStream(8), 5))


def test_gaussian_sample_moments():
    draws = gaussian_sample(RngStream(3), 10 ** 6)
    assert abs(draws.mean()) <= 4 / math.sqrt(10 ** 6)
    assert abs(draws.var() - 1.0) <= 0.01


def test_gaussian_sample_rejects_empty():
    with pytest.raises(DimensionError):
        gaussian_sample(RngStream(0), 0)


def test_derived_streams_are_reproducible_and_distinct():
    root = RngStream(11)
    assert np.array_equal(root.derive("shuffle", 3).uniform(4), RngStream(11).derive("shuffle", 3).uniform(4))
    assert not np.array_equal(root.derive("shuffle", 3).uniform(4), root.derive("shuffle", 4).uniform(4))
    assert derive_seed(11, "a", 1) != derive_seed(11, "a", 2)


def test_matrix_vector_product_matches_naive_loops():
    rng = np.random.default_rng(4)
    W = as_matrix(rng.normal(size=(20, 20)))
    x = as_vector(rng.normal(size=20), dim=20)
    naive = [sum(W[i, j] * x[j] for j in range(20)) for i in range(20)]
    assert np.max(np.abs(W @ x - np.array(naive))) <= 1e-12


def test_shape_and_finiteness_checks():
    with pytest.raises(DimensionError):
        as_vector([1.0, 2.0], dim=3)
    with pytest.raises(DimensionError):
        as_matrix([1.0, 2.0])
    with pytest.raises(NumericError):
        check_finite(np.array([1.0, np.nan]))
