import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ckrr.errors import ConfigError
from ckrr.kernels import (
    FourierSeries,
    FourierTail,
    Gaussian,
    Laplace,
    Matern32,
    NngpErf,
    cross_gram,
    eval_kernel,
    gram,
    kernel_from_dict,
)

ALL_KERNELS = [
    (FourierSeries(s=1.0, J=50), 1),
    (FourierTail(s=1.0, J=50, k=3), 1),
    (Gaussian(gamma=0.7), 3),
    (Laplace(gamma=1.3), 3),
    (Matern32(lengthscale=0.8), 2),
    (NngpErf(weight_variance=1.5, bias_variance=0.2), 4),
]


def test_fourier_self_value_closed_form():
    k = FourierSeries(s=1.0, J=3)
    assert eval_kernel(k, 0.7, 0.7) == pytest.approx(1 + 1 + 0.25 + 1 / 9, abs=1e-15)


@pytest.mark.parametrize("s", [0.75, 1.0, 2.0])
@pytest.mark.parametrize("J", [10, 300])
def test_fourier_self_value_partial_sum(s, J):
    expected = 1.0 + math.fsum(i ** (-2 * s) for i in range(1, J + 1))
    for x in (0.0, 1.1, 5.9):
        assert eval_kernel(FourierSeries(s, J), x, x) == pytest.approx(expected, rel=1e-13)


def test_fourier_tail_equals_series_minus_head(rng):
    full, tail = FourierSeries(1.0, 200), FourierTail(1.0, 200, 3)
    for x, y in rng.uniform(0, 2 * np.pi, (10, 2)):
        head = 1 + sum(i**-2.0 * (np.cos(i * x) * np.cos(i * y) + np.sin(i * x) * np.sin(i * y)) for i in (1, 2, 3))
        assert abs(eval_kernel(tail, x, y) - (eval_kernel(full, x, y) - head)) < 1e-12


def test_fourier_tail_beyond_truncation_is_zero():
    assert eval_kernel(FourierTail(1.0, 5, 5), 0.3, 0.3) == 0.0


def test_gaussian_identity_and_duplicate_points():
    assert eval_kernel(Gaussian(1.0), [0.2, 0.4], [0.2, 0.4]) == 1.0
    G = gram(Gaussian(1.0), np.array([[1.0, 2.0], [1.0, 2.0]]))
    np.testing.assert_array_equal(G, np.ones((2, 2)))


def test_gram_single_point():
    G = gram(Laplace(0.5), np.array([[0.3, -0.1]]))
    assert G.shape == (1, 1) and G[0, 0] == pytest.approx(1.0)


@pytest.mark.parametrize("spec,d", ALL_KERNELS)
def test_gram_symmetric_and_psd(spec, d, rng):
    X = rng.uniform(0, 2 * np.pi, (60, d)) if d == 1 else rng.standard_normal((60, d))
    G = gram(spec, X)
    np.testing.assert_array_equal(G, G.T)
    assert np.linalg.eigvalsh(G).min() >= -1e-10 * np.trace(G)


@pytest.mark.parametrize("spec,d", ALL_KERNELS)
def test_eval_symmetry_exact(spec, d, rng):
    for _ in range(5):
        x, y = rng.standard_normal(d), rng.standard_normal(d)
        assert eval_kernel(spec, x, y) == eval_kernel(spec, y, x)


@pytest.mark.parametrize("spec,d", ALL_KERNELS)
def test_cross_gram_consistency(spec, d, rng):
    X, Z = rng.standard_normal((7, d)), rng.standard_normal((4, d))
    C = cross_gram(spec, X, Z)
    assert np.max(np.abs(C - cross_gram(spec, Z, X).T)) <= 1e-15 * max(1.0, np.abs(C).max())
    np.testing.assert_allclose(cross_gram(spec, X, X), gram(spec, X), rtol=0, atol=1e-14)
    assert cross_gram(spec, X, np.empty((0, d))).shape == (7, 0)
    for i in range(3):
        assert C[i, 1] == pytest.approx(eval_kernel(spec, X[i], Z[1]), rel=1e-12, abs=1e-14)


def test_fourier_psd_random_points(rng):
    G = gram(FourierSeries(1.0, 50), rng.uniform(0, 2 * np.pi, (20, 1)))
    assert np.linalg.eigvalsh(G).min() >= -1e-10 * np.trace(G)


def test_nngp_matches_arcsine_formula():
    spec = NngpErf(weight_variance=2.0, bias_variance=0.5)
    x, y = np.array([0.3, -1.0]), np.array([1.2, 0.4])
    d = 2

    def S(a, b):
        return 0.5 + 2.0 * (a @ b) / d

    expected = 2 / np.pi * np.arcsin(2 * S(x, y) / np.sqrt((1 + 2 * S(x, x)) * (1 + 2 * S(y, y))))
    assert eval_kernel(spec, x, y) == pytest.approx(expected, rel=1e-12)


def test_errors():
    with pytest.raises(ConfigError):
        FourierSeries(s=-1.0)
    with pytest.raises(ConfigError):
        Gaussian(gamma=0.0)
    with pytest.raises(ValueError):
        eval_kernel(FourierSeries(), [0.1, 0.2], [0.3, 0.4])
    with pytest.raises(ValueError):
        gram(Gaussian(), np.array([[np.nan, 0.0]]))
    with pytest.raises(ConfigError):
        kernel_from_dict({"variant": "nope"})


def test_dict_round_trip():
    for spec, _ in ALL_KERNELS:
        assert kernel_from_dict(spec.to_dict()) == spec


@given(st.floats(0.0, 2 * np.pi), st.floats(0.0, 2 * np.pi), st.floats(0.6, 3.0))
def test_fourier_bounded_by_self_value(x, y, s):
    spec = FourierSeries(s, 40)
    v = eval_kernel(spec, x, y)
    assert abs(v) <= spec.self_value() + 1e-12
    assert v == eval_kernel(spec, y, x)
